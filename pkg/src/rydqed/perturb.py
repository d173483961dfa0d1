"""Stark and Zeeman perturbation theory for hydrogenic states.

Work is organized by magnetic sector: H_S = -E0 z conserves m, so all
Stark corrections of a parabolic state |n n1 n2 m> live in the span of the
spherical states (n', l, m) with n' up to a cutoff.  Inside one sector
the first-order shifts (3/2) n (n1 - n2) of manifold n are all distinct,
so Rayleigh-Schroedinger theory for the degenerate level is regular.

With V = -z (per unit field), R = Q / (E_n - H0) and |l> a parabolic
state of manifold n, the corrections used here are

    psi1 = R V |l> + sum_k c_k |k>,     c_k = <k|V R V|l> / (E1_l - E1_k)
    E2   = <l|V R V|l>
    Q psi2 = R V psi1 - E1_l R (Q psi1)
    d_k  = (<k|V Q psi2> - E2 c_k) / (E1_l - E1_k)
    E3   = <l|V Q psi2>
    psi2 = Q psi2 + sum_k d_k |k> - (1/2) <psi1|psi1> |l>

where k runs over the other parabolic states of manifold n in the sector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .basis import (CONSTANTS, NormTag, ParabolicLabel, SphericalLabel, StateVector,
                    energy, parabolic_in_sector, parabolic_to_spherical, sector_labels)
from .matelem import operator_matrix

DEGENERACY_TOL = 1e-12


class Geometry(str, Enum):
    E_along_z_B_along_x = "E_along_z_B_along_x"


class PhysicsError(RuntimeError):
    """A vanishing energy denominator that the formalism does not allow."""


@dataclass(frozen=True)
class FieldConfiguration:
    """Static fields in SI units (V/m, T) with atomic-unit mirrors."""

    E0: float = 0.0
    B0: float = 0.0
    geometry: Geometry = Geometry.E_along_z_B_along_x

    def __post_init__(self):
        if self.E0 < 0 or self.B0 < 0:
            raise ValueError("field magnitudes must be non-negative")

    @classmethod
    def from_au(cls, E0_au: float = 0.0, B0_au: float = 0.0) -> "FieldConfiguration":
        return cls(E0_au * CONSTANTS.field_au, B0_au * CONSTANTS.bfield_au)

    @property
    def E0_au(self) -> float:
        return self.E0 / CONSTANTS.field_au

    @property
    def B0_au(self) -> float:
        """Magnetic field in SI-style atomic units, where H_Z = (B/2) L_x."""
        return self.B0 / CONSTANTS.bfield_au

    def zeeman_ratio(self, n: int) -> float:
        """c0 B0 / (E0 n / alpha); the Zeeman-weak regime needs this << 1."""
        if self.E0 == 0:
            return math.inf if self.B0 > 0 else 0.0
        return CONSTANTS.alpha * CONSTANTS.c0 * self.B0 / (self.E0 * n)

    def zeeman_weak(self, n: int, margin: float = 1.0) -> bool:
        return self.zeeman_ratio(n) * margin < 1.0

    def expansion_parameter(self, n: int) -> float:
        """Stark energy over Coulomb spacing, of order E0 n^5 in atomic units."""
        return self.E0_au * n ** 5


@dataclass
class StarkEnergy:
    label: ParabolicLabel
    e1: float
    e2: float
    e3: float
    converged: bool = True
    achieved_tol: float = 0.0
    basis_cutoff: int = 0


@dataclass
class PerturbedState:
    base: ParabolicLabel | SphericalLabel
    order: int
    vector: StateVector
    field: FieldConfiguration
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")


def stark_shift_order1(p: ParabolicLabel, E0: float) -> float:
    """First-order Stark energy (3/2) n (n1 - n2) E0, all in atomic units."""
    return 1.5 * p.n * (p.n1 - p.n2) * E0


@dataclass
class StarkExpansion:
    """Per-unit-field corrections of one parabolic state in a sector basis."""

    label: ParabolicLabel
    e: tuple[float, float, float, float]      # E0, E1, E2, E3 (E0 = unperturbed)
    psi: tuple[np.ndarray, np.ndarray, np.ndarray]  # orders 0, 1, 2
    in_subspace: tuple[np.ndarray, np.ndarray]      # c_k and d_k coefficients

    def state(self, E0: float, order: int) -> np.ndarray:
        v = self.psi[0].copy()
        for k in range(1, order + 1):
            v = v + E0 ** k * self.psi[k]
        return v

    def energy(self, E0: float, order: int) -> float:
        return sum(self.e[k] * E0 ** k for k in range(order + 1))


class StarkSector:
    """Truncated basis with fixed m and the Stark operator inside it."""

    def __init__(self, m: int, n: int, n_max: int, n_min: int = 1):
        if n_max < n:
            raise ValueError("n_max must be at least n")
        self.m, self.n, self.n_max = m, n, n_max
        self.labels = sector_labels(m, n_max, n_min)
        self.index = {lab: i for i, lab in enumerate(self.labels)}
        self.h0 = np.array([energy(lab.n) for lab in self.labels])
        self.V = -operator_matrix(self.labels, self.labels, "z").real
        self.in_P = np.array([lab.n == n for lab in self.labels])
        gap = energy(n) - self.h0
        self.rdiag = np.where(self.in_P, 0.0, 1.0 / np.where(self.in_P, 1.0, gap))
        self.parabolic = parabolic_in_sector(n, m)
        self.pvecs = np.array([self._embed(parabolic_to_spherical(p)) for p in self.parabolic])
        self.e1 = np.array([p @ self.V @ p for p in self.pvecs]) if len(self.pvecs) else np.zeros(0)
        self._cache: dict[int, StarkExpansion] = {}

    @property
    def dim(self) -> int:
        return len(self.labels)

    def _embed(self, sv: StateVector) -> np.ndarray:
        v = np.zeros(self.dim)
        for lab, c in sv:
            v[self.index[lab]] = c
        return v

    def R(self, x: np.ndarray) -> np.ndarray:
        return self.rdiag * x

    def position(self, p: ParabolicLabel) -> int:
        return self.parabolic.index(p)

    def expand(self, p: ParabolicLabel) -> StarkExpansion:
        idx = self.position(p)
        if idx in self._cache:
            return self._cache[idx]
        V, ps = self.V, self.pvecs
        l0 = ps[idx]
        e1 = self.e1[idx]
        others = [k for k in range(len(ps)) if k != idx]
        for k in others:
            if abs(e1 - self.e1[k]) < DEGENERACY_TOL:
                raise PhysicsError(f"degenerate first-order shifts inside sector m={self.m}")
        q1 = self.R(V @ l0)
        c = np.array([(ps[k] @ V @ q1) / (e1 - self.e1[k]) for k in others])
        psi1 = q1 + (c @ ps[others] if others else 0.0)
        e2 = l0 @ V @ q1
        q2 = self.R(V @ psi1) - e1 * self.R(q1)
        vq2 = V @ q2
        d = np.array([(ps[k] @ vq2 - e2 * c[j]) / (e1 - self.e1[k]) for j, k in enumerate(others)])
        psi2 = q2 + (d @ ps[others] if others else 0.0) - 0.5 * (psi1 @ psi1) * l0
        e3 = l0 @ vq2
        out = StarkExpansion(p, (energy(self.n), e1, e2, e3), (l0, psi1, psi2), (c, d))
        self._cache[idx] = out
        return out

    def circular_first_order(self) -> np.ndarray:
        """Nondegenerate first-order correction of |nC> (sector m = n - 1)."""
        return self.expand(ParabolicLabel(0, 0, self.m)).psi[1]

    def diagonalize(self, E0: float) -> tuple[np.ndarray, np.ndarray]:
        """Finite-field eigenpairs of H0 - E0 z in the truncated sector."""
        return np.linalg.eigh(np.diag(self.h0) + E0 * self.V)

    def to_state_vector(self, vec: np.ndarray, energy_value: float | None,
                        tag: NormTag = NormTag.first_order_truncated) -> StateVector:
        return StateVector.from_array(self.labels, vec, energy_value, tag)


@lru_cache(maxsize=64)
def get_sector(m: int, n: int, n_max: int) -> StarkSector:
    return StarkSector(m, n, n_max)


def stark_shift_high_orders(p: ParabolicLabel, basis_cutoff: int, tol: float = 1e-6) -> StarkEnergy:
    """E^(2), E^(3) per unit field from sums over the discrete spectrum.

    The sums are evaluated at ``basis_cutoff`` and with the distance above n
    doubled; the doubled result is returned and flagged as unconverged when
    the two differ by more than ``tol`` (relative).
    """
    n = p.n
    if basis_cutoff < n + 10:
        raise ValueError("basis_cutoff must be at least n + 10")
    coarse = get_sector(p.m, n, basis_cutoff).expand(p)
    cut = n + 2 * (basis_cutoff - n)
    fine = get_sector(p.m, n, cut).expand(p)
    # e3 vanishes by symmetry for n1 = n2; measure it against the e2 scale
    rel_err = max(_rel(fine.e[2], coarse.e[2]),
                  _rel(fine.e[3], coarse.e[3], scale=abs(fine.e[2]) * n ** 3))
    return StarkEnergy(p, fine.e[1], fine.e[2], fine.e[3], rel_err < tol, rel_err, cut)


def _rel(a: float, b: float, scale: float = 0.0) -> float:
    den = max(abs(a), abs(b), scale, 1e-300)
    return abs(a - b) / den


def stark_closed_form(p: ParabolicLabel) -> tuple[float, float, float]:
    """Hydrogen Stark coefficients including the continuum (third order).

    E1 = (3/2) n q,  E2 = -(1/16) n^4 (17 n^2 - 3 q^2 - 9 m^2 + 19),
    E3 = (3/32) n^7 q (23 n^2 - q^2 + 11 m^2 + 39), q = n1 - n2;
    standard textbook results for H = H0 - E0 z in atomic units.
    """
    n, q, m = p.n, p.n1 - p.n2, p.m
    e1 = 1.5 * n * q
    e2 = -n ** 4 * (17 * n ** 2 - 3 * q ** 2 - 9 * m ** 2 + 19) / 16
    e3 = 3 * n ** 7 * q * (23 * n ** 2 - q ** 2 + 11 * m ** 2 + 39) / 32
    return e1, e2, e3


def stark_state(p: ParabolicLabel | SphericalLabel, E0: float, order: int, basis_cutoff: int,
                field: FieldConfiguration | None = None) -> PerturbedState:
    """Stark-perturbed state; ``E0`` in atomic units.

    The result holds the correction terms through ``order`` and the energy
    through order ``order + 1``.
    """
    if isinstance(p, SphericalLabel):
        if p.l != p.n - 1 or p.m != p.n - 1:
            raise ValueError("spherical input must be the circular state")
        p = ParabolicLabel(0, 0, p.m)
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    sector = get_sector(p.m, p.n, basis_cutoff)
    ex = sector.expand(p)
    vec = ex.state(E0, order)
    sv = sector.to_state_vector(vec, ex.energy(E0, order + 1))
    fld = field or FieldConfiguration.from_au(E0_au=E0)
    diag = {"basis_cutoff": basis_cutoff, "sector_dim": sector.dim, "e": list(ex.e),
            "in_subspace_c": ex.in_subspace[0].tolist(), "skipped_pairs": [],
            "expansion_parameter": E0 * p.n ** 5}
    return PerturbedState(p, order, sv, fld, diag)


def zeeman_state(s: PerturbedState, B0: float, basis_cutoff: int,
                 denominator: str = "rs") -> PerturbedState:
    """Add the first-order Zeeman admixture to a Stark eigenstate.

    ``B0`` is in SI-style atomic units (H_Z = (B0/2) L_x).  Intermediate
    states are the finite-field eigenstates of the m +/- 1 sectors, so
    in-subspace denominators carry the full Stark shifts.  ``denominator``
    selects E_s - E_j (``rs``, standard perturbation theory) or E_j - E_s
    (``printed``); the second only exists to reproduce a sign analysis.
    """
    if denominator not in ("rs", "printed"):
        raise ValueError("denominator must be 'rs' or 'printed'")
    if B0 == 0.0:
        return s
    base_vec = s.vector
    E_s = base_vec.energy
    if E_s is None:
        raise ValueError("Stark state needs energy metadata")
    E0 = s.field.E0_au
    m = s.base.m
    n = s.base.n
    terms = dict(base_vec.terms)
    skipped = []
    labels_base = [lab for lab, _ in base_vec.terms]
    cbase = np.array([c for _, c in base_vec.terms])
    for mm in (m - 1, m + 1):
        if mm < -(basis_cutoff - 1) or mm > basis_cutoff - 1:
            continue
        sec = StarkSector(mm, min(max(abs(mm) + 1, n), basis_cutoff), basis_cutoff)
        w, v = sec.diagonalize(E0)
        lx = operator_matrix(sec.labels, labels_base, "Lx")
        h = 0.5 * B0 * (v.T @ (lx @ cbase))     # <j,E|H_Z|s>
        for j in range(len(w)):
            if abs(h[j]) < 1e-300:
                continue
            den = E_s - w[j]
            if abs(den) < DEGENERACY_TOL:
                if abs(h[j]) < 1e-12 * abs(B0):
                    skipped.append(j)
                    continue
                raise PhysicsError("vanishing Zeeman denominator with nonzero coupling")
            if denominator == "printed":
                den = -den
            coef = h[j] / den
            for i, lab in enumerate(sec.labels):
                terms[lab] = terms.get(lab, 0.0) + coef * v[i, j]
    sv = StateVector(list(terms.items()), E_s, NormTag.first_order_truncated)
    diag = dict(s.diagnostics)
    diag.update({"zeeman_B0_au": B0, "zeeman_skipped": skipped, "zeeman_denominator": denominator})
    fld = FieldConfiguration(s.field.E0, B0 * CONSTANTS.bfield_au)
    return PerturbedState(s.base, s.order, sv, fld, diag)
