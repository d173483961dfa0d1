"""Hydrogen bound-state labels, energies and angular-momentum algebra.

Everything here works in Hartree atomic units with the reduced mass set to
one, so ``E_n = -1/(2 n^2)``.  Parabolic states are expanded on the spherical
basis with Clebsch-Gordan coefficients of two angular momenta j = (n-1)/2.
With the plain Condon-Shortley coefficients (no extra l-dependent phase)
the expectation value of z in |n n1 n2 m> is -(3/2) n (n1 - n2), so the
first-order energy under H_S = -E0 z is +(3/2) n (n1 - n2) E0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import exp, isclose, lgamma, log, sqrt
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.constants as sc


class DomainError(ValueError):
    """Raised for quantum numbers outside their allowed range."""


@dataclass(frozen=True, order=True)
class SphericalLabel:
    n: int
    l: int
    m: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.l <= self.n - 1:
            raise DomainError(f"l={self.l} outside [0, {self.n - 1}]")
        if abs(self.m) > self.l:
            raise DomainError(f"|m|={abs(self.m)} exceeds l={self.l}")

    def to_json(self) -> dict:
        return {"n": self.n, "l": self.l, "m": self.m}


@dataclass(frozen=True, order=True)
class ParabolicLabel:
    n1: int
    n2: int
    m: int

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise DomainError("parabolic quantum numbers must be non-negative")

    @property
    def n(self) -> int:
        return self.n1 + self.n2 + abs(self.m) + 1

    def to_json(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "m": self.m}


class NormTag(str, Enum):
    normalized = "normalized"
    first_order_truncated = "first_order_truncated"


@dataclass
class StateVector:
    """Coefficients of a state over spherical labels.

    ``energy`` is optional metadata (Hartree); the commutator route for the
    momentum operator needs it.
    """

    terms: list[tuple[SphericalLabel, complex]]
    energy: float | None = None
    norm_tag: NormTag = NormTag.normalized

    def __post_init__(self):
        labels = [lab for lab, _ in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError("StateVector labels must be distinct")
        if self.norm_tag == NormTag.normalized and self.terms:
            if not isclose(self.norm2(), 1.0, abs_tol=1e-12):
                raise ValueError(f"normalized StateVector has norm^2 {self.norm2()!r}")

    def norm2(self) -> float:
        return float(sum(abs(c) ** 2 for _, c in self.terms))

    def as_dict(self) -> dict[SphericalLabel, complex]:
        return dict(self.terms)

    def __iter__(self) -> Iterator[tuple[SphericalLabel, complex]]:
        return iter(self.terms)

    @classmethod
    def from_array(cls, labels: Sequence[SphericalLabel], coeffs, energy=None,
                   norm_tag=NormTag.normalized, drop_below: float = 0.0) -> "StateVector":
        terms = [(lab, complex(c) if np.iscomplexobj(c) else float(c))
                 for lab, c in zip(labels, coeffs) if abs(c) > drop_below]
        return cls(terms, energy, norm_tag)

    def to_array(self, labels: Sequence[SphericalLabel]) -> np.ndarray:
        index = {lab: i for i, lab in enumerate(labels)}
        out = np.zeros(len(labels), dtype=complex)
        for lab, c in self.terms:
            out[index[lab]] = c
        return out


@dataclass(frozen=True)
class PhysicalConstants:
    alpha: float = sc.fine_structure
    a0: float = sc.physical_constants["Bohr radius"][0]
    c0: float = sc.c
    hbar: float = sc.hbar
    e_charge: float = sc.e
    m_e: float = sc.m_e
    m_p: float = sc.m_p

    def __post_init__(self):
        a0 = self.hbar / (self.alpha * self.m_e * self.c0)
        if abs(a0 / self.a0 - 1) > 1e-9:
            raise ValueError("inconsistent constant set: a0 != hbar/(alpha m_e c0)")

    # atomic-unit conversion factors (SI value of one atomic unit)
    @property
    def hartree(self) -> float:
        return self.hbar ** 2 / (self.m_e * self.a0 ** 2)

    @property
    def field_au(self) -> float:
        """Atomic unit of electric field in V/m."""
        return self.e_charge / (4 * np.pi * sc.epsilon_0 * self.a0 ** 2)

    @property
    def bfield_au(self) -> float:
        """Atomic unit of magnetic flux density in T (SI-style atomic units)."""
        return self.hbar / (self.e_charge * self.a0 ** 2)

    @property
    def time_au(self) -> float:
        return self.hbar / self.hartree

    @property
    def momentum_au(self) -> float:
        return self.hbar / self.a0

    @property
    def polarizability_au(self) -> float:
        """SI value (C m^2 / V) of one a0^3 of polarizability volume."""
        return 4 * np.pi * sc.epsilon_0 * self.a0 ** 3

    @property
    def c_au(self) -> float:
        return 1.0 / self.alpha


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class AtomSpec:
    m1: float = CONSTANTS.m_p
    m2: float = CONSTANTS.m_e

    def __post_init__(self):
        if not self.m1 > self.m2 > 0:
            raise DomainError("AtomSpec requires m1 > m2 > 0")

    @property
    def M(self) -> float:
        return self.m1 + self.m2

    @property
    def mu(self) -> float:
        return self.m1 * self.m2 / self.M

    @property
    def delta_m(self) -> float:
        return self.m1 - self.m2


def energy(n: int) -> float:
    """Unperturbed energy of manifold n in Hartree."""
    if n < 1:
        raise DomainError(f"energy undefined for n={n}")
    return -0.5 / n ** 2


def _as_twice(x) -> int:
    """Return 2x as an int, failing for values that are not (half-)integers."""
    t = 2 * x
    r = int(round(t))
    if abs(t - r) > 1e-9:
        raise DomainError(f"{x!r} is not an integer or half-integer")
    return r


@lru_cache(maxsize=1 << 16)
def _cg2(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    # all arguments are doubled quantum numbers
    if m1 + m2 != M:
        return 0.0
    if J < abs(j1 - j2) or J > j1 + j2 or (j1 + j2 + J) % 2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if (j1 - m1) % 2 or (j2 - m2) % 2 or (J - M) % 2:
        raise DomainError("projection and angular momentum differ by a half-integer")
    h = lambda v: v // 2  # noqa: E731  (exact: parities checked above)
    lf = lambda v: lgamma(v + 1)  # noqa: E731
    pref = 0.5 * (log(J + 1) + lf(h(j1 + j2 - J)) + lf(h(j1 - j2 + J)) + lf(h(-j1 + j2 + J))
                  - lf(h(j1 + j2 + J) + 1) + lf(h(J + M)) + lf(h(J - M))
                  + lf(h(j1 - m1)) + lf(h(j1 + m1)) + lf(h(j2 - m2)) + lf(h(j2 + m2)))
    kmin = max(0, h(j2 - J - m1), h(j1 + m2 - J))
    kmax = min(h(j1 + j2 - J), h(j1 - m1), h(j2 + m2))
    logs, signs = [], []
    for k in range(kmin, kmax + 1):
        logs.append(-(lf(k) + lf(h(j1 + j2 - J) - k) + lf(h(j1 - m1) - k) + lf(h(j2 + m2) - k)
                      + lf(h(J - j2 + m1) + k) + lf(h(J - j1 - m2) + k)))
        signs.append(-1.0 if k % 2 else 1.0)
    if not logs:
        return 0.0
    top = max(logs)
    s = sum(sg * exp(lg - top) for sg, lg in zip(signs, logs))
    return s * exp(pref + top)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Condon-Shortley coefficient <j1 m1; j2 m2 | J M>.

    Arguments may be integers, half-integers or floats holding either.  The
    Racah sum is accumulated in log space so j of order 25 is safe.
    """
    args = [_as_twice(v) for v in (j1, m1, j2, m2, J, M)]
    for j, m in ((args[0], args[1]), (args[2], args[3]), (args[4], args[5])):
        if j < 0:
            raise DomainError("angular momentum must be non-negative")
        if (j - m) % 2:
            raise DomainError("projection and angular momentum differ by a half-integer")
    return _cg2(*args)


def threej(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner 3j symbol from the Clebsch-Gordan coefficient."""
    phase = -1.0 if _as_twice(j1 - j2 - m3) % 4 else 1.0
    return phase / sqrt(2 * j3 + 1) * clebsch_gordan(j1, m1, j2, m2, j3, -m3)


def parabolic_to_spherical(p: ParabolicLabel) -> StateVector:
    n = p.n
    j = (n - 1) / 2
    m1 = (p.m + p.n1 - p.n2) / 2
    m2 = (p.m - p.n1 + p.n2) / 2
    terms = []
    for l in range(abs(p.m), n):
        c = clebsch_gordan(j, m1, j, m2, l, p.m)
        if c != 0.0:
            terms.append((SphericalLabel(n, l, p.m), c))
    return StateVector(terms, energy(n), NormTag.normalized)


def circular_state(n: int) -> SphericalLabel:
    return SphericalLabel(n, n - 1, n - 1)


def circular_parabolic(n: int) -> ParabolicLabel:
    return ParabolicLabel(0, 0, n - 1)


def subspace(n: int) -> list[ParabolicLabel]:
    """All parabolic labels of manifold n (n^2 of them)."""
    if n < 1:
        raise DomainError(f"subspace undefined for n={n}")
    out = []
    for m in range(-(n - 1), n):
        k = n - 1 - abs(m)
        out.extend(ParabolicLabel(n1, k - n1, m) for n1 in range(k + 1))
    return out


def manifold_labels(n: int, m: int | None = None) -> list[SphericalLabel]:
    ms = range(-(n - 1), n) if m is None else [m]
    return [SphericalLabel(n, l, mm) for mm in ms for l in range(abs(mm), n)]


def sector_labels(m: int, n_max: int, n_min: int = 1) -> list[SphericalLabel]:
    """Spherical labels with fixed m and n_min <= n <= n_max, ordered by (n, l)."""
    lo = max(n_min, abs(m) + 1)
    return [SphericalLabel(n, l, m) for n in range(lo, n_max + 1) for l in range(abs(m), n)]


def parabolic_in_sector(n: int, m: int) -> list[ParabolicLabel]:
    """Parabolic labels of manifold n with magnetic number m, ordered by n1."""
    k = n - 1 - abs(m)
    if k < 0:
        return []
    return [ParabolicLabel(n1, k - n1, m) for n1 in range(k + 1)]


def coefficient_matrix(n: int) -> tuple[np.ndarray, list[ParabolicLabel], list[SphericalLabel]]:
    """Full parabolic-to-spherical matrix of manifold n (rows: spherical)."""
    plabs = subspace(n)
    slabs = manifold_labels(n)
    idx = {lab: i for i, lab in enumerate(slabs)}
    U = np.zeros((len(slabs), len(plabs)))
    for k, p in enumerate(plabs):
        for lab, c in parabolic_to_spherical(p):
            U[idx[lab], k] = c
    return U, plabs, slabs


def labels_from_json(items: Iterable[dict]) -> list:
    out = []
    for d in items:
        if "l" in d:
            out.append(SphericalLabel(d["n"], d["l"], d["m"]))
        else:
            out.append(ParabolicLabel(d["n1"], d["n2"], d["m"]))
    return out
