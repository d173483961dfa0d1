"""Classical Abraham momentum and the vacuum corrections kappa_2, kappa_1b, kappa_1a.

Geometry: E0 along z, B0 along x, so the classical momentum
P_A = alpha_zz E0 B0 points along +y.  Each channel is reported as the
dimensionless ratio  kappa = y . P_long / (fine_alpha^2 |P_A|).

Atomic units (SI-style for B, so H_Z = (B0/2) L_x) give

    kappa_2  = -rho / (2 alpha_zz),       <nC,E0| rhat_z |nC,E0> = rho E0
    kappa_1  =  S / (2 alpha_zz E0),      S = Re sum_j <nC,E0|(Dp)_y|j,E0><j,E0|L_x|nC,E0> / (E_nC - E_j)

with (Dp) = r^-1 (1 + rhat rhat) . p.  The out-of-manifold part of S is
linear in E0 through <j,E0|L_x|nC,E0> = i E0 <j|y|nC> / (E_n - E_j).  The
in-manifold part is a Laurent series in E0; kappa_1a is its E0-linear
coefficient, assembled from the numerator coefficients N_k and the
energy-difference coefficients d_k = E^(k)_nC - E^(k)_j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .basis import CONSTANTS, NormTag, ParabolicLabel, SphericalLabel, circular_state, energy
from .matelem import RadialIntegralKey, Vector3, c1, operator_matrix, radial_integral, unit_rvec
from .perturb import FieldConfiguration, PhysicsError, get_sector

FINE_ALPHA = CONSTANTS.alpha
DEFAULT_E0 = 1e2      # V/m
DEFAULT_B0 = 3e-5     # T; keeps alpha c0 B0 / (E0 n) below 0.1 for n >= 10
CONVERGENCE_TOL = 1e-3


class Channel(str, Enum):
    k1a = "k1a"
    k1b = "k1b"
    k2 = "k2"


class Sign(str, Enum):
    parallel = "parallel"
    antiparallel = "antiparallel"


@dataclass
class KappaResult:
    n: int
    channel: Channel
    value: float
    sign_vs_PA: Sign
    convergence: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.convergence.get("converged", True))

    def to_json(self) -> dict:
        return {"n": self.n, "channel": self.channel.value, "value": self.value,
                "sign_vs_PA": self.sign_vs_PA.value, "convergence": self.convergence}


@dataclass
class AbrahamMomentum:
    vector: Vector3            # SI, kg m/s
    vector_au: Vector3
    polarizability_used: float  # a0^3


def _sign(v: float) -> Sign:
    return Sign.parallel if v > 0 else Sign.antiparallel


def polarizability_closed(n: int, m: int) -> float:
    """(1/8) n^4 (17 n^2 - 9 m^2 + 19) in units of a0^3."""
    return n ** 4 * (17 * n * n - 9 * m * m + 19) / 8


def _circular_sum(n: int, n_max: int) -> float:
    lab = circular_state(n)
    terms = []
    for n2 in range(n + 1, n_max + 1):
        # only l = n couples to the circular state within m = n - 1
        z = c1(n, n - 1, 0, n - 1, n - 1) * radial_integral(RadialIntegralKey(n2, n, n, n - 1, 1))
        terms.append(2 * z * z / (energy(n2) - energy(n)))
    return math.fsum(terms)


def polarizability_sum(n: int, basis_cutoff: int | None = None, tol: float = 1e-6,
                       max_cutoff: int = 4000) -> tuple[float, dict]:
    """Discrete-spectrum sum 2 sum_j |<nC|z|j>|^2 / (E_j - E_nC).

    The distance of the cutoff above n is doubled until the relative change
    drops below ``tol``.  Returns the value and convergence diagnostics.
    """
    cut = basis_cutoff or n + 40
    if cut < n + 10:
        raise ValueError("basis_cutoff must be at least n + 10")
    val = _circular_sum(n, cut)
    history = [(cut, val)]
    while True:
        nxt = n + 2 * (cut - n)
        if nxt > max_cutoff:
            break
        v2 = _circular_sum(n, nxt)
        history.append((nxt, v2))
        rel = abs(v2 - val) / abs(v2)
        cut, val = nxt, v2
        if rel < tol:
            return val, {"converged": True, "basis_cutoff": cut, "rel_change": rel, "history": history}
    rel = abs(history[-1][1] - history[-2][1]) / abs(history[-1][1]) if len(history) > 1 else math.inf
    return val, {"converged": rel < tol, "basis_cutoff": cut, "rel_change": rel, "history": history}


def abraham_momentum(n: int, fields: FieldConfiguration, b_sign: int = 1) -> AbrahamMomentum:
    """P_A = alpha_zz E0 x B0 (SI: alpha_zz in C m^2/V); ``b_sign`` reverses B0."""
    a = polarizability_closed(n, n - 1)
    mag_si = a * CONSTANTS.polarizability_au * fields.E0 * fields.B0 * b_sign
    mag_au = a * fields.E0_au * fields.B0_au * b_sign
    return AbrahamMomentum(Vector3(0.0, mag_si, 0.0), Vector3(0.0, mag_au, 0.0), a)


REFERENCE_ABRAHAM_FORCE = 5e-29 / 1e3   # N, implied by the quoted AC-force comparison


def abraham_force(n: int, fields: FieldConfiguration, omega: float) -> float:
    """Amplitude of d|P_A|/dt in N for B0 oscillating at angular frequency ``omega``."""
    return abraham_momentum(n, fields).vector.norm() * omega


def abraham_anchor_ratio(n: int = 50, fields: FieldConfiguration | None = None, omega: float = 1e4,
                         reference: float = REFERENCE_ABRAHAM_FORCE) -> float:
    """Ratio of the Rydberg Abraham force to the reference measured-scale force."""
    fields = fields or FieldConfiguration(1e2, 1e-3)
    return abraham_force(n, fields, omega) / reference


# ---------------------------------------------------------------------------
# sector bookkeeping shared by the kappa channels
# ---------------------------------------------------------------------------

def _sectors(n: int, n_max: int, m_sign: int):
    mc = m_sign * (n - 1)
    sC = get_sector(mc, n, n_max)
    sL = get_sector(mc - m_sign, n, n_max)     # |m| = n - 2
    sU = get_sector(mc + m_sign, n, n_max)     # |m| = n, no manifold-n states
    return sC, sL, sU


@lru_cache(maxsize=256)
def _matrix(rows_key, cols_key, kind, component):
    (m1, n1, c1_), (m2, n2, c2_) = rows_key, cols_key
    rows = get_sector(m1, n1, c1_).labels
    cols = get_sector(m2, n2, c2_).labels
    return operator_matrix(rows, cols, kind, component)


def _key(s):
    return (s.m, s.n, s.n_max)


def _check_args(n: int, basis_cutoff: int | None, default_delta: int = 12) -> int:
    if n < 3:
        raise ValueError("kappa channels need n >= 3")
    cut = basis_cutoff or n + default_delta
    if cut < n + 10:
        raise ValueError("basis_cutoff must be at least n + 10")
    return cut


def _converge(fn, n: int, cut: int, adaptive: bool, tol: float = CONVERGENCE_TOL):
    v1 = fn(cut)
    if not adaptive:
        return v1, {"basis_cutoff": cut, "converged": None}
    cut2 = n + 2 * (cut - n)
    v2 = fn(cut2)
    a1 = v1[0] if isinstance(v1, tuple) else v1
    a2 = v2[0] if isinstance(v2, tuple) else v2
    rel = abs(a2 - a1) / max(abs(a2), 1e-300)
    return v2, {"basis_cutoff": cut2, "coarse_cutoff": cut, "coarse_value": float(a1),
                "rel_change": float(rel), "converged": bool(rel < tol)}


# ---------------------------------------------------------------------------
# kappa_2
# ---------------------------------------------------------------------------

def rhat_response(n: int, n_max: int, m_sign: int = 1) -> float:
    """rho with <nC,E0| rhat_z |nC,E0> = rho E0 + O(E0^3)."""
    sC = get_sector(m_sign * (n - 1), n, n_max)
    ex = sC.expand(ParabolicLabel(0, 0, m_sign * (n - 1)))
    rz = _matrix(_key(sC), _key(sC), "rhat", 2).real
    return float(2 * ex.psi[0] @ rz @ ex.psi[1])


def kappa2(n: int, E0: float = DEFAULT_E0, basis_cutoff: int | None = None,
           adaptive: bool = True, linear_check: bool = True, m_sign: int = 1) -> KappaResult:
    """Gauge-term channel from the first-order Stark state; ``E0`` in V/m."""
    cut = _check_args(n, basis_cutoff)
    alpha_zz = polarizability_closed(n, n - 1)
    rho, conv = _converge(lambda c: rhat_response(n, c, m_sign), n, cut, adaptive)
    value = -rho / (2 * alpha_zz)
    if linear_check:
        conv.update(_linear_check_k2(n, conv["basis_cutoff"], E0, rho, m_sign))
    return KappaResult(n, Channel.k2, float(value), _sign(value), conv)


def _linear_check_k2(n, n_max, E0, rho, m_sign):
    sC = get_sector(m_sign * (n - 1), n, n_max)
    rz = _matrix(_key(sC), _key(sC), "rhat", 2).real
    i0 = sC.index[SphericalLabel(n, n - 1, m_sign * (n - 1))]
    ratios = []
    for f in (E0, E0 / 2):
        e_au = f / CONSTANTS.field_au
        w, v = sC.diagonalize(e_au)
        k = int(np.argmax(np.abs(v[i0, :])))
        ratios.append(float(v[:, k] @ rz @ v[:, k]) / e_au)
    spread = abs(ratios[0] - ratios[1]) / abs(ratios[1])
    return {"finite_field_rho": ratios, "finite_field_vs_perturbative": abs(ratios[1] - rho) / abs(rho),
            "nonlinear": bool(spread > 0.01)}


# ---------------------------------------------------------------------------
# kappa_1b
# ---------------------------------------------------------------------------

def out_of_manifold_sum(n: int, n_max: int, m_sign: int = 1, component: int = 1) -> float:
    """E0-linear coefficient of S restricted to states outside manifold n.

    ``component`` selects the Cartesian component of (Dp); 1 is the y axis.
    """
    sC, sL, sU = _sectors(n, n_max, m_sign)
    psiC = sC.expand(ParabolicLabel(0, 0, m_sign * (n - 1))).psi[0]
    total = []
    for s in (sL, sU):
        dpy = _matrix(_key(sC), _key(s), "delta_p", component)   # <C|(Dp)_c|j>
        y = _matrix(_key(s), _key(sC), "r", 1)           # <j|y|C>
        a = psiC @ dpy
        b = y @ psiC
        den = energy(n) - s.h0
        outside = ~s.in_P
        t = (a * 1j * b)[outside] / den[outside] ** 2
        total.extend(np.real(t))
    return math.fsum(total)


def kappa1b(n: int, E0: float = DEFAULT_E0, B0: float = DEFAULT_B0, basis_cutoff: int | None = None,
            adaptive: bool = True, m_sign: int = 1, zeeman_denominator: str = "rs") -> KappaResult:
    """Zeeman channel through states outside the degenerate manifold."""
    cut = _check_args(n, basis_cutoff)
    fld = FieldConfiguration(E0, B0)
    alpha_zz = polarizability_closed(n, n - 1)
    s1, conv = _converge(lambda c: out_of_manifold_sum(n, c, m_sign), n, cut, adaptive)
    value = s1 / (2 * alpha_zz) * _zsign(zeeman_denominator)
    conv.update({"zeeman_ratio": fld.zeeman_ratio(n), "zeeman_weak": fld.zeeman_weak(n),
                 "zeeman_denominator": zeeman_denominator})
    return KappaResult(n, Channel.k1b, float(value), _sign(value), conv)


def _zsign(denominator: str) -> float:
    if denominator not in ("rs", "printed"):
        raise ValueError("zeeman_denominator must be 'rs' or 'printed'")
    return 1.0 if denominator == "rs" else -1.0


# ---------------------------------------------------------------------------
# kappa_1a
# ---------------------------------------------------------------------------

@dataclass
class InManifoldTerms:
    """Laurent data of the in-manifold sum for one intermediate state."""

    label: ParabolicLabel
    N: tuple[complex, complex, complex]
    d: tuple[float, float, float]

    def pieces(self) -> np.ndarray:
        N0, N1, N2 = self.N
        d1, d2, d3 = self.d
        return np.array([(N2 / d1).real, (-N1 * d2 / d1 ** 2).real,
                         (-N0 * d3 / d1 ** 2).real, (N0 * d2 ** 2 / d1 ** 3).real])

    def inverse_coefficient(self) -> float:
        """Coefficient of 1/E0 in S."""
        return (self.N[0] / self.d[0]).real

    def constant_coefficient(self) -> float:
        N0, N1, _ = self.N
        d1, d2, _ = self.d
        return (N1 / d1 - N0 * d2 / d1 ** 2).real


def in_manifold_terms(n: int, n_max: int, m_sign: int = 1, component: int = 1) -> list[InManifoldTerms]:
    mc = m_sign * (n - 1)
    sC, sL, _ = _sectors(n, n_max, m_sign)
    C = sC.expand(ParabolicLabel(0, 0, mc))
    dpy = _matrix(_key(sC), _key(sL), "delta_p", component)
    lx = _matrix(_key(sL), _key(sC), "Lx", None)
    out = []
    for p in sL.parabolic:
        J = sL.expand(p)
        # coefficient of E0^k in <C,E|(Dp)_y|J,E> and <J,E|L_x|C,E>
        A = [sum(C.psi[i] @ dpy @ J.psi[k - i] for i in range(k + 1)) for k in range(3)]
        B = [sum(J.psi[i] @ lx @ C.psi[k - i] for i in range(k + 1)) for k in range(3)]
        N = tuple(sum(A[i] * B[k - i] for i in range(k + 1)) for k in range(3))
        d = tuple(C.e[k] - J.e[k] for k in (1, 2, 3))
        if abs(d[0]) < 1e-12:
            raise PhysicsError("in-manifold first-order denominator below the degeneracy tolerance")
        out.append(InManifoldTerms(p, N, d))
    return out


def _k1a_data(n: int, n_max: int, m_sign: int):
    terms = in_manifold_terms(n, n_max, m_sign)
    pieces = sum(t.pieces() for t in terms)
    inv = math.fsum(t.inverse_coefficient() for t in terms)
    const = math.fsum(t.constant_coefficient() for t in terms)
    return float(pieces.sum()), pieces, inv, const


def kappa1a(n: int, E0: float = DEFAULT_E0, B0: float = DEFAULT_B0, basis_cutoff: int | None = None,
            include_inverse_E_term: bool = False, adaptive: bool = True, m_sign: int = 1,
            zeeman_denominator: str = "rs") -> KappaResult:
    """Zeeman channel inside the degenerate manifold (E0-linear Laurent coefficient).

    With ``include_inverse_E_term`` the 1/E0 and E0^0 parts of S, which give
    kappa contributions scaling as 1/E0^2 and 1/E0 at the requested field,
    are added to the value.
    """
    cut = _check_args(n, basis_cutoff)
    fld = FieldConfiguration(E0, B0)
    alpha_zz = polarizability_closed(n, n - 1)
    data, conv = _converge(lambda c: _k1a_data(n, c, m_sign), n, cut, adaptive)
    total, pieces, inv, const = data
    zs = _zsign(zeeman_denominator)
    e_au = fld.E0_au
    k_inv = zs * inv / (2 * alpha_zz * e_au ** 2) if e_au > 0 else math.inf
    k_const = zs * const / (2 * alpha_zz * e_au) if e_au > 0 else math.inf
    value = zs * total / (2 * alpha_zz)
    conv.update({
        "pieces": (zs * pieces / (2 * alpha_zz)).tolist(),
        "piece_names": ["second_order_state", "E2_difference", "E3_difference", "E2_squared"],
        "inverse_E_kappa": k_inv, "constant_S_kappa": k_const,
        "inverse_E_ratio": abs(k_inv) / abs(value) if value else math.inf,
        "include_inverse_E_term": include_inverse_E_term,
        "zeeman_ratio": fld.zeeman_ratio(n), "zeeman_weak": fld.zeeman_weak(n),
        "zeeman_denominator": zeeman_denominator,
    })
    if include_inverse_E_term:
        value = value + k_inv + k_const
    return KappaResult(n, Channel.k1a, float(value), _sign(value), conv)


def kappa_direction(n: int, basis_cutoff: int | None = None) -> dict[str, np.ndarray]:
    """Cartesian direction of each channel's momentum, scaled so |y| = 1.

    kappa_2 follows B0 x <rhat> with B0 along x; the kappa_1 channels use
    all three components of (Dp).  Only the y entries should survive.
    """
    cut = _check_args(n, basis_cutoff)
    sC = get_sector(n - 1, n, cut)
    ex = sC.expand(ParabolicLabel(0, 0, n - 1))
    psi = sC.to_state_vector(ex.psi[0] + ex.psi[1], None, NormTag.first_order_truncated)
    r = unit_rvec(psi, psi).to_array().real
    k2 = np.cross([1.0, 0.0, 0.0], r)
    k1b = np.array([out_of_manifold_sum(n, cut, 1, c) for c in range(3)])
    k1a = np.array([sum(t.pieces().sum() for t in in_manifold_terms(n, cut, 1, c)) for c in range(3)])
    return {k: v / abs(v[1]) for k, v in (("k2", k2), ("k1b", k1b), ("k1a", k1a))}


def kappa_total(n: int, **kw) -> dict:
    k1a = kappa1a(n, **kw)
    k1b = kappa1b(n, **{k: v for k, v in kw.items() if k != "include_inverse_E_term"})
    k2 = kappa2(n, **{k: v for k, v in kw.items() if k in ("E0", "basis_cutoff", "adaptive", "m_sign")})
    return {"k1a": k1a.value, "k1b": k1b.value, "k2": k2.value,
            "total": k1a.value + k1b.value + k2.value}


def kappa1a_fit_curve(n: float) -> float:
    """Fit curve quoted for kappa_1a, reading 5,788e-2 as 5.788e-2."""
    x = 50.0 / n
    return 2.78 + 5.788e-2 * x * x - 1.05e-1 * x
