"""Aharonov-Casher-type vacuum momentum of a Stark superposition.

The superposition |nR(t)> = (|0,0,n-1> + exp(-i w_n t)|1,0,n-2>)/sqrt(2) has
an angular momentum rotating about E0 = E0 z.  Virtual photons renormalize
the electron and nuclear masses differently, which leaves a momentum

    <P_long(t)> = -(8 alpha / 3 pi) log(m1/m2) <p(t)>     (times 1/4 relativistically)

with <p(t)> the internal momentum of the Stark superposition.  Time is in
seconds at the public boundary; internal work uses atomic units (mu = 1,
reduced-mass corrections to a0 ignored as in the closed forms).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .basis import (CONSTANTS, AtomSpec, DomainError, NormTag, ParabolicLabel, StateVector,
                    energy, parabolic_to_spherical)
from .matelem import ContractError, Vector3, angular_momentum, momentum_p, p2_p, position_vector
from .perturb import stark_shift_order1

ALPHA = CONSTANTS.alpha
QUARTER = 0.25
REFERENCE_FORCE = 5e-29          # N, quoted order of magnitude
FORCE_BAND = 30.0


class AlgebraError(RuntimeError):
    """Two independent routes to the same quantity disagree."""


@dataclass
class IntegralResult:
    value: float
    abs_error: float
    cutoff_used: float | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.abs_error >= 0:
            raise ValueError("abs_error must be non-negative")


@dataclass
class SuperpositionState:
    components: list[tuple[ParabolicLabel, complex]]
    n: int
    time: float = 0.0

    def __post_init__(self):
        if any(p.n != self.n for p, _ in self.components):
            raise DomainError("all components must belong to manifold n")
        norm = sum(abs(b) ** 2 for _, b in self.components)
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"superposition norm^2 {norm!r} != 1")

    def gamma(self) -> dict:
        """gamma_{l l'} = beta_l conj(beta_l'), phases already in the betas."""
        return {(a, b): ba * np.conj(bb) for a, ba in self.components for b, bb in self.components}

    def spherical_terms(self) -> list[tuple[StateVector, complex]]:
        return [(parabolic_to_spherical(p), b) for p, b in self.components]


@dataclass
class ACResult:
    p_long_amplitude: float     # kg m/s
    stark_omega: float          # rad/s
    displacement: float         # m, p / (M w)
    force: float                # N, w p
    relativistic_quarter_applied: bool
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# k-integrals
# ---------------------------------------------------------------------------

def _log_quad(f, lo: float, hi: float, points=None) -> tuple[float, float]:
    """int f(u) du over u in (e^lo, e^hi) done in s = log u."""
    g = lambda s: f(math.exp(s)) * math.exp(s)  # noqa: E731
    v, e = integrate.quad(g, lo, hi, points=points, limit=400, epsabs=0.0, epsrel=1e-12)
    return v, e


def renorm_combination(m1: float, m2: float) -> IntegralResult:
    """delta m1/m1 - delta m2/m2 as a cutoff-free k-integral (dimensionless).

    With u = hbar k / (m2 c0) the integrand is
    (4 alpha/3 pi) [1/(r + u/2) - 1/(1 + u/2)], r = m1/m2, whose tails cancel.
    """
    if m1 < m2 or m2 <= 0:
        raise DomainError("renorm_combination requires m1 >= m2 > 0")
    if m1 == m2:
        return IntegralResult(0.0, 0.0, None)
    r = m1 / m2
    f = lambda u: 1.0 / (r + u / 2) - 1.0 / (1 + u / 2)  # noqa: E731
    lo, hi = -40.0, math.log(r) + 60.0
    v, e = _log_quad(f, lo, hi, points=[0.0, math.log(r)])
    # tails: near 0 the integrand is bounded, beyond e^hi it decays as 1/u^2
    tail = 2 * (r - 1) * 2 / math.exp(hi)
    pref = 4 * ALPHA / (3 * math.pi)
    return IntegralResult(pref * v, pref * (e + tail + math.exp(lo)), None)


def renorm_closed_form(m1: float, m2: float) -> float:
    return -8 * ALPHA / (3 * math.pi) * math.log(m1 / m2)


def delta_m(mass: float, k_cutoff: float) -> IntegralResult:
    """delta m = (4 alpha hbar^2/3 pi) int_0^K k dk / (hbar c0 k + hbar^2 k^2 / 2m), in kg."""
    if not math.isfinite(k_cutoff):
        raise ContractError("delta_m diverges logarithmically; a finite cutoff is required")
    if mass <= 0 or k_cutoff <= 0:
        raise DomainError("mass and cutoff must be positive")
    hbar, c0 = CONSTANTS.hbar, CONSTANTS.c0
    # dimensionless u = hbar k / (2 m c0): integrand reduces to 1/(1+u)
    umax = hbar * k_cutoff / (2 * mass * c0)
    v, e = _log_quad(lambda u: 1.0 / (1.0 + u), -50.0, math.log(umax),
                     points=[0.0] if math.log(umax) > 0 else None)
    pref = 8 * ALPHA * mass / (3 * math.pi)
    closed = pref * math.log1p(umax)
    return IntegralResult(pref * (v + math.exp(-50.0)), pref * e, k_cutoff,
                          {"closed_form": closed})


def renorm_difference_at_cutoff(m1: float, m2: float, k_cutoff: float) -> float:
    return delta_m(m1, k_cutoff).value / m1 - delta_m(m2, k_cutoff).value / m2


def renorm_extrapolated(m1: float, m2: float, k0: float | None = None, levels: int = 6) -> IntegralResult:
    """Limit of delta m1/m1 - delta m2/m2 for K -> infinity.

    The finite-cutoff difference approaches its limit as O(1/K); a Richardson
    table over K, 2K, 4K, ... removes the leading powers.
    """
    if k0 is None:
        k0 = 1e6 * 2 * m1 * CONSTANTS.c0 / CONSTANTS.hbar
    row = [renorm_difference_at_cutoff(m1, m2, k0 * 2 ** i) for i in range(levels)]
    table = [row]
    for j in range(1, levels):
        prev = table[-1]
        table.append([(2 ** j * prev[i + 1] - prev[i]) / (2 ** j - 1) for i in range(len(prev) - 1)])
    best = table[-1][0]
    err = abs(best - table[-2][-1])
    return IntegralResult(best, err, k0 * 2 ** (levels - 1))


def _h_rel(x: float) -> float:
    # x / (s (s + x - 1)) * x with s = sqrt(1 + x^2), written without cancellation
    s = math.sqrt(1.0 + x * x)
    return x / (s * (1.0 + x / (s + 1.0)))


def relativistic_integral(m1: float, m2: float) -> IntegralResult:
    """Relativistic k-integral in units of 1/(hbar), masses scaled by m2 c0."""
    r = m1 / m2
    f = lambda u: (_h_rel(u / r) - _h_rel(u)) / u  # noqa: E731
    lo, hi = -40.0, math.log(r) + 60.0
    v, e = _log_quad(f, lo, hi, points=[0.0, math.log(r)])
    return IntegralResult(v, e + 0.5 * r * math.exp(-hi) + math.exp(lo))


def nonrelativistic_integral(m1: float, m2: float) -> float:
    """Closed form -(2/hbar) log(m1/m2), in the same units."""
    return -2.0 * math.log(m1 / m2)


def relativistic_ratio(m1: float, m2: float) -> tuple[float, dict]:
    """Relativistic over nonrelativistic k-integral; returns (ratio, flags)."""
    if m1 < m2 or m2 <= 0:
        raise DomainError("relativistic_ratio requires m1 >= m2 > 0")
    if m1 == m2:
        return 0.25, {"degenerate_input": True}
    rel = relativistic_integral(m1, m2)
    nr = nonrelativistic_integral(m1, m2)
    ratio = rel.value / nr
    return ratio, {"degenerate_input": False, "abs_error": rel.abs_error / abs(nr),
                   "converged": rel.abs_error < 1e-8 * abs(nr)}


# ---------------------------------------------------------------------------
# nR superposition dynamics
# ---------------------------------------------------------------------------

def stark_frequency(n: int, E0: float) -> float:
    """(3/2) n e a0 E0 / hbar in rad/s; ``E0`` in V/m."""
    return 1.5 * n * CONSTANTS.e_charge * CONSTANTS.a0 * E0 / CONSTANTS.hbar


def _nR_labels(n: int) -> tuple[ParabolicLabel, ParabolicLabel]:
    if n < 3:
        raise DomainError("the nR superposition needs n >= 3")
    return ParabolicLabel(0, 0, n - 1), ParabolicLabel(1, 0, n - 2)


def nR_state(n: int, t: float, E0: float = 1.0) -> SuperpositionState:
    """(|0,0,n-1> + exp(-i w_n t)|1,0,n-2>)/sqrt(2), t in seconds."""
    a, b = _nR_labels(n)
    ph = np.exp(-1j * stark_frequency(n, E0) * t)
    s = 1 / math.sqrt(2)
    return SuperpositionState([(a, complex(s)), (b, complex(s * ph))], n, t)


def _stark_states(state: SuperpositionState, E0_au: float) -> list[tuple[StateVector, complex]]:
    """Zeroth-order parabolic states carrying first-order Stark energies."""
    out = []
    for p, b in state.components:
        sv = parabolic_to_spherical(p)
        sv = StateVector(sv.terms, energy(p.n) + stark_shift_order1(p, E0_au), NormTag.normalized)
        out.append((sv, b))
    return out


def _expect(state: SuperpositionState, E0_au: float, f) -> np.ndarray:
    """sum_{l,l'} conj(b_l') b_l <l'|O|l>."""
    terms = _stark_states(state, E0_au)
    total = np.zeros(3, dtype=complex)
    for sa, ba in terms:
        for sb, bb in terms:
            total += np.conj(ba) * bb * f(sa, sb).to_array()
    return total


def angular_momentum_closed(n: int, t: float, E0: float = 1.0) -> Vector3:
    """hbar (sqrt(n-1)/2 cos wt, -sqrt(n-1)/2 sin wt, n - 3/2).

    The y component carries the rotation sense that follows from
    exp(-i w t) on |1,0,n-2> with w > 0.
    """
    w = stark_frequency(n, E0)
    a = math.sqrt(n - 1) / 2
    return Vector3(a * math.cos(w * t), -a * math.sin(w * t), n - 1.5)


def angular_momentum_direct(n: int, t: float, E0: float = 1.0) -> Vector3:
    st = nR_state(n, t, E0)
    v = _expect(st, E0 / CONSTANTS.field_au, angular_momentum)
    return Vector3.from_array(v)


def angular_momentum_t(n: int, t: float, E0: float = 1.0, tol: float = 1e-10) -> tuple[Vector3, Vector3]:
    """<L(t)> in units of hbar, as (closed form, direct expansion)."""
    c = angular_momentum_closed(n, t, E0)
    d = angular_momentum_direct(n, t, E0)
    diff = np.max(np.abs(c.to_array() - d.to_array()))
    if diff > tol:
        raise AlgebraError(f"<L(t)> routes disagree by {diff:.3e} at n={n}")
    return c, d


def dipole_t(n: int, t: float, E0: float = 1.0) -> np.ndarray:
    """<r(t)> in bohr (d = e r with r pointing from electron to core)."""
    st = nR_state(n, t, E0)
    return _expect(st, E0 / CONSTANTS.field_au, position_vector).real


def _richardson_derivative(f, t: float, h: float) -> np.ndarray:
    d1 = (f(t + h) - f(t - h)) / (2 * h)
    d2 = (f(t + h / 2) - f(t - h / 2)) / h
    return (4 * d2 - d1) / 3


def torque_residual(n: int, E0: float, t: float) -> float:
    """|| d<L>/dt - <d> x E0 || / || <d> x E0 ||, finite differences in time."""
    w = stark_frequency(n, E0)
    h = 1e-2 / w
    L = lambda s: angular_momentum_direct(n, s, E0).to_array().real  # noqa: E731
    dL = _richardson_derivative(L, t, h) * CONSTANTS.hbar      # J
    r = dipole_t(n, t, E0) * CONSTANTS.a0 * CONSTANTS.e_charge
    torque = np.cross(r, np.array([0.0, 0.0, E0]))
    return float(np.linalg.norm(dL - torque) / np.linalg.norm(torque))


def second_derivative_residual(n: int, E0: float, t: float) -> float:
    """|| d^2 <L>_xy/dt^2 + w^2 <L>_xy || / (w^2 |<L>_xy|)."""
    w = stark_frequency(n, E0)
    h = 1e-2 / w
    L = lambda s: angular_momentum_direct(n, s, E0).to_array().real[:2]  # noqa: E731
    d2 = (L(t + h) - 2 * L(t) + L(t - h)) / h ** 2
    d2b = (L(t + h / 2) - 2 * L(t) + L(t - h / 2)) / (h / 2) ** 2
    acc = (4 * d2b - d2) / 3
    return float(np.linalg.norm(acc + w * w * L(t)) / (w * w * np.linalg.norm(L(t))))


# ---------------------------------------------------------------------------
# Aharonov-Casher-type momentum
# ---------------------------------------------------------------------------

def internal_momentum(state: SuperpositionState, E0: float) -> np.ndarray:
    """<p(t)> in atomic units via <a|p|b> = i (E_a - E_b) <a|r|b>."""
    return _expect(state, E0 / CONSTANTS.field_au, momentum_p)


def ac_momentum(n: int, E0: float, t: float, apply_quarter: bool = True,
                atom: AtomSpec = AtomSpec(), state: SuperpositionState | None = None) -> Vector3:
    """-(8 alpha/3 pi) log(m1/m2) <p(t)> in kg m/s (times 1/4 by default)."""
    if E0 <= 0:
        raise DomainError("E0 must be positive")
    st = state if state is not None else nR_state(n, t, E0)
    p = internal_momentum(st, E0)
    scale = renorm_closed_form(atom.m1, atom.m2) * (QUARTER if apply_quarter else 1.0)
    return Vector3.from_array(scale * p * CONSTANTS.momentum_au)


def momentum_from_dipole(n: int, E0: float, t: float) -> np.ndarray:
    """(mu/e) d<d>/dt in atomic units, by finite differences."""
    w = stark_frequency(n, E0)
    h_si = 1e-2 / w
    f = lambda s: dipole_t(n, s, E0)  # noqa: E731
    return _richardson_derivative(f, t, h_si) * CONSTANTS.time_au


def ac_amplitude_closed(n: int, E0: float, apply_quarter: bool = True) -> float:
    """(3/4 pi) n^2 sqrt(n-1) e a0 E0 / c0; the printed form carries the 1/4."""
    v = 3 / (4 * math.pi) * n * n * math.sqrt(n - 1) * CONSTANTS.e_charge * CONSTANTS.a0 * E0 / CONSTANTS.c0
    return v if apply_quarter else 4 * v


def displacement_formula(n: int, M: float | None = None, apply_quarter: bool = True) -> float:
    """(n/8) sqrt(n-1) 1e-15 (m_p/M) metres; M defaults to the hydrogen mass."""
    M = AtomSpec().M if M is None else M
    v = n / 8 * math.sqrt(n - 1) * 1e-15 * CONSTANTS.m_p / M
    return v if apply_quarter else 4 * v


def ac_amplitude(n: int, E0: float, apply_quarter: bool = True, atom: AtomSpec = AtomSpec()) -> ACResult:
    if n < 3:
        raise DomainError("ac_amplitude needs n >= 3")
    p = ac_amplitude_closed(n, E0, apply_quarter)
    w = stark_frequency(n, E0)
    force = w * p
    log_ratio = math.log(atom.m1 / atom.m2)
    diag = {
        "displacement_formula": displacement_formula(n, atom.M, apply_quarter),
        "displacement_prefactor_form": (QUARTER if apply_quarter else 1.0) * 4 * n * math.sqrt(n - 1)
        * ALPHA * CONSTANTS.m_e / atom.M * CONSTANTS.a0,
        "p_long_amplitude_with_log": p * log_ratio,
        "log_mass_ratio": log_ratio,
        "reference_force": REFERENCE_FORCE,
        "force_ratio_to_reference": force / REFERENCE_FORCE,
        "force_within_band": 1 / FORCE_BAND <= force / REFERENCE_FORCE <= FORCE_BAND,
        "inverse_stark_omega_ms": 1e3 / w,
    }
    return ACResult(p, w, p / (atom.M * w), force, apply_quarter, diag)


def ac_amplitude_numeric(n: int, E0: float, apply_quarter: bool = True, atom: AtomSpec = AtomSpec(),
                         samples: int = 8) -> float:
    """max_t |<P_long(t)>| sampled over one Stark period (the modulus is constant)."""
    w = stark_frequency(n, E0)
    ts = np.linspace(0.0, 2 * math.pi / w, samples, endpoint=False)
    return max(ac_momentum(n, E0, t, apply_quarter, atom).norm() for t in ts)


# ---------------------------------------------------------------------------
# transverse estimate
# ---------------------------------------------------------------------------

def transverse_estimate(n: int, E0: float, t: float = 0.0, variant: str = "p2p",
                        state: SuperpositionState | None = None,
                        apply_quarter: bool = True) -> tuple[Vector3, dict]:
    """alpha^3 sum gamma <l'|p^3|l> in kg m/s, with the ratio to |<P_long>|."""
    st = state if state is not None else nR_state(n, t, E0)
    v = _expect(st, E0 / CONSTANTS.field_au, lambda a, b: p2_p(a, b, variant))
    p_trans = ALPHA ** 3 * v * CONSTANTS.momentum_au
    p_long = ac_momentum(n, E0, t, apply_quarter, state=st).norm()
    mag = float(np.linalg.norm(p_trans))
    ratio = mag / p_long if p_long > 0 else (0.0 if mag == 0 else math.inf)
    a2 = ALPHA ** 2
    return Vector3.from_array(p_trans), {
        "ratio": ratio, "ratio_over_alpha2": ratio / a2,
        "within_band": a2 / 30 <= ratio <= 30 * a2, "variant": variant,
    }
