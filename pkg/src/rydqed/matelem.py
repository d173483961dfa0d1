"""Hydrogenic matrix elements with a persistent radial-integral cache.

Radial integrals are computed with Gauss-Laguerre quadrature in the scaled
variable x = (1/n + 1/n') r.  The integrand is then a polynomial of degree
at most n + n' + 1 times the Laguerre weight, so a rule with
(n + n')//2 + 10 nodes (at least 40) is exact up to rounding.  Nodes and
log-weights come from the Golub-Welsch eigenproblem followed by a Newton
polish; the radial functions are evaluated as log-magnitude plus sign.

When the quadrature terms cancel so strongly that double precision cannot
hold 1e-10 relative accuracy, the integral is recomputed from the exact
power series of the two Laguerre polynomials in multiple precision.

Vector operators are handled through their spherical components
V_q (q = -1, 0, +1) with angular factor <l' m'|C^1_q|l m>, and converted to
Cartesian components with V_x = (V_-1 - V_+1)/sqrt2 and
V_y = i (V_-1 + V_+1)/sqrt2.
"""
from __future__ import annotations

import math
import os
import struct
import threading
import zlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.linalg import eigh_tridiagonal

from .basis import SphericalLabel, StateVector, energy, threej

SQRT2 = math.sqrt(2.0)
CANCELLATION_LIMIT = 1e3  # sum|t| / |sum t| beyond which the exact series is used
ALLOWED_POWERS = (-2, -1, 0, 1, 2)


class NumericError(ArithmeticError):
    pass


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class Vector3:
    x: complex
    y: complex
    z: complex

    @classmethod
    def from_array(cls, v) -> "Vector3":
        v = np.asarray(v)
        conv = (lambda c: complex(c)) if np.iscomplexobj(v) else float
        return cls(conv(v[0]), conv(v[1]), conv(v[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def real(self) -> "Vector3":
        return Vector3(float(np.real(self.x)), float(np.real(self.y)), float(np.real(self.z)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_array()))


# ---------------------------------------------------------------------------
# Gauss-Laguerre rule and radial functions
# ---------------------------------------------------------------------------

def _laguerre_scaled(k: int, a: float, x: np.ndarray):
    """Return (log|L_k^a(x)|, sign, L_k / s, L_{k-1} / s) with a common scale s."""
    x = np.asarray(x, dtype=float)
    logscale = np.zeros_like(x)
    prev = np.ones_like(x)
    if k == 0:
        return np.zeros_like(x), np.ones_like(x), prev, np.zeros_like(x)
    cur = 1.0 + a - x
    for j in range(1, k):
        prev, cur = cur, ((2 * j + 1 + a - x) * cur - (j + a) * prev) / (j + 1)
        if j % 8:
            continue
        big = np.abs(cur) > 1e100
        if big.any():
            s = np.where(big, np.abs(cur), 1.0)
            cur = cur / s
            prev = prev / s
            logscale += np.log(s)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(cur)) + logscale, np.sign(cur), cur, prev


@lru_cache(maxsize=None)
def gauss_laguerre(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and natural-log weights of the N-point Gauss-Laguerre rule."""
    i = np.arange(N, dtype=float)
    x = eigh_tridiagonal(2 * i + 1, np.arange(1, N, dtype=float), eigvals_only=True)
    for _ in range(3):
        _, _, c, p = _laguerre_scaled(N, 0.0, x)
        # Newton step with L_N' = N (L_N - L_{N-1}) / x, using the scaled pair
        x = x - x * c / (N * (c - p))
    lp, _, _, _ = _laguerre_scaled(N + 1, 0.0, x)
    logw = np.log(x) - 2 * math.log(N + 1) - 2 * lp
    x.setflags(write=False)
    logw.setflags(write=False)
    return x, logw


def node_count(n: int, n_prime: int) -> int:
    return max(40, (n + n_prime) // 2 + 10)


def _log_norm(n: int, l: int) -> float:
    return 0.5 * (3 * math.log(2.0 / n) + math.lgamma(n - l) - math.log(2.0 * n) - math.lgamma(n + l + 1))


def radial_function(n: int, l: int, r, deriv: bool = False, with_exp: bool = True):
    """R_nl(r) or its derivative, normalized so that int R^2 r^2 dr = 1."""
    r = np.asarray(r, dtype=float)
    k, a, y = n - l - 1, 2 * l + 1, 2 * r / n
    ln = _log_norm(n, l)
    lL, sL, _, _ = _laguerre_scaled(k, a, y)
    with np.errstate(divide="ignore"):
        base = sL * np.exp(ln + l * np.log(y) + lL)
    if deriv:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = base * (np.where(r > 0, l / np.where(r > 0, r, 1.0), 0.0) - 1.0 / n)
        if k > 0:
            lL2, sL2, _, _ = _laguerre_scaled(k - 1, a + 1, y)
            with np.errstate(divide="ignore"):
                val = val - sL2 * np.exp(ln + l * np.log(y) + lL2) * (2.0 / n)
        if l == 1:
            # l/r * y^l is finite at the origin
            val = np.where(r > 0, val, math.exp(ln) * (2.0 / n) * _laguerre_at0(k, a))
        base = val
    if with_exp:
        base = base * np.exp(-r / n)
    return base


def _laguerre_at0(k: int, a: int) -> float:
    return math.comb(k + a, k)


@dataclass(frozen=True)
class RadialIntegralKey:
    """Key for  int R_nl r^power (d/dr)^deriv R_n'l' r^2 dr."""

    n: int
    l: int
    n_prime: int
    l_prime: int
    power: int
    deriv: bool = False

    def __post_init__(self):
        for nn, ll in ((self.n, self.l), (self.n_prime, self.l_prime)):
            if nn < 1 or not 0 <= ll < nn:
                raise ContractError(f"invalid radial labels ({nn}, {ll})")
        if self.power not in ALLOWED_POWERS:
            raise ContractError(f"power {self.power} not in {ALLOWED_POWERS}")

    def canonical(self) -> "RadialIntegralKey":
        """Symmetric integrals share one cache entry."""
        if not self.deriv and (self.n_prime, self.l_prime) < (self.n, self.l):
            return RadialIntegralKey(self.n_prime, self.l_prime, self.n, self.l, self.power, False)
        return self


@lru_cache(maxsize=1 << 14)
def _grid_values(n: int, l: int, n_other: int, deriv: bool) -> tuple[np.ndarray, np.ndarray]:
    """Radial factor of R_nl (without the exponential) on the rule used for the
    pair (n, n_other): log-magnitude and sign, or the plain derivative values."""
    x, _ = gauss_laguerre(node_count(n, n_other))
    r = x / (1.0 / n + 1.0 / n_other)
    if deriv:
        v = radial_function(n, l, r, deriv=True, with_exp=False)
        return v, np.ones_like(v)
    la, sa, _, _ = _laguerre_scaled(n - l - 1, 2 * l + 1, 2 * r / n)
    return la + _log_norm(n, l) + l * np.log(2 * r / n), sa


def _quadrature_terms(key: RadialIntegralKey) -> np.ndarray:
    n, l, n2, l2, p = key.n, key.l, key.n_prime, key.l_prime, key.power
    x, logw = gauss_laguerre(node_count(n, n2))
    beta = 1.0 / n + 1.0 / n2
    common = logw + (2 + p) * np.log(x / beta) - math.log(beta)
    la, sa = _grid_values(n, l, n2, False)
    if key.deriv:
        db, _ = _grid_values(n2, l2, n, True)
        return sa * np.exp(common + la) * db
    lb, sb = _grid_values(n2, l2, n, False)
    return sa * sb * np.exp(common + la + lb)


@lru_cache(maxsize=4096)
def _series_coeffs(n: int, l: int, dps: int) -> tuple:
    """R_nl(r) = exp(-r/n) * sum_s c[s] r^s  (mpmath coefficients)."""
    with mpmath.workdps(dps):
        k, a = n - l - 1, 2 * l + 1
        norm = mpmath.sqrt(mpmath.mpf(2) ** 3 / mpmath.mpf(n) ** 3 * mpmath.factorial(k)
                           / (2 * n * mpmath.factorial(n + l)))
        c = [mpmath.mpf(0)] * (l + k + 1)
        for i in range(k + 1):
            c[l + i] = (norm * (-1) ** i * mpmath.binomial(k + a, k - i) / mpmath.factorial(i)
                        * (mpmath.mpf(2) / n) ** (l + i))
        return tuple(c)


def radial_integral_exact(key: RadialIntegralKey, dps: int = 60) -> float:
    """Closed-form evaluation from the Laguerre power series (multiple precision)."""
    with mpmath.workdps(dps):
        ca = _series_coeffs(key.n, key.l, dps)
        cb = list(_series_coeffs(key.n_prime, key.l_prime, dps))
        if key.deriv:
            # d/dr [e^{-r/n'} sum c_s r^s] = e^{-r/n'} sum (s c_s r^{s-1} - c_s r^s / n')
            d = [mpmath.mpf(0)] * len(cb)
            for s, cs in enumerate(cb):
                if s:
                    d[s - 1] += s * cs
                d[s] -= cs / key.n_prime
            cb = d
        # convolve the two power series, then integrate r^s e^{-beta r}
        conv = [mpmath.mpf(0)] * (len(ca) + len(cb) - 1)
        for i, x in enumerate(ca):
            if x:
                for j, y in enumerate(cb):
                    if y:
                        conv[i + j] += x * y
        beta = mpmath.mpf(1) / key.n + mpmath.mpf(1) / key.n_prime
        total = mpmath.mpf(0)
        for t, c in enumerate(conv):
            if c:
                s = t + 2 + key.power
                if s < 0:
                    raise NumericError(f"divergent radial integral for {key}")
                total += c * mpmath.factorial(s) / beta ** (s + 1)
        return float(total)


def radial_integral_quadrature(key: RadialIntegralKey) -> tuple[float, float]:
    """Quadrature value and the sum of absolute terms (cancellation measure)."""
    t = _quadrature_terms(key)
    if not np.all(np.isfinite(t)):
        raise NumericError(f"non-finite quadrature terms for {key}")
    return math.fsum(t), float(np.sum(np.abs(t)))


# ---------------------------------------------------------------------------
# Persistent cache
# ---------------------------------------------------------------------------

_RECORD = struct.Struct("<5iid")
_CRC = struct.Struct("<I")
RECORD_SIZE = _RECORD.size + _CRC.size  # 36 bytes


def encode_record(key: RadialIntegralKey, value: float) -> bytes:
    body = _RECORD.pack(key.n, key.l, key.n_prime, key.l_prime, int(key.deriv), key.power, value)
    return body + _CRC.pack(zlib.crc32(body))


def decode_records(blob: bytes) -> tuple[dict, int]:
    """Parse cache bytes; return entries and the number of rejected records."""
    out, bad = {}, 0
    usable = len(blob) - len(blob) % RECORD_SIZE
    bad += (len(blob) % RECORD_SIZE) > 0
    for off in range(0, usable, RECORD_SIZE):
        body = blob[off:off + _RECORD.size]
        (crc,) = _CRC.unpack_from(blob, off + _RECORD.size)
        if zlib.crc32(body) != crc:
            bad += 1
            continue
        n, l, n2, l2, d, p, v = _RECORD.unpack(body)
        try:
            key = RadialIntegralKey(n, l, n2, l2, p, bool(d))
        except ContractError:
            bad += 1
            continue
        out[key] = v
    return out, bad


def default_cache_dir() -> Path | None:
    env = os.environ.get("RYDQED_CACHE_DIR")
    if env is not None:
        return Path(env) if env else None
    return Path.home() / ".cache" / "rydqed"


class RadialCache:
    """In-memory index backed by an append-only binary file.

    Records are little-endian ``[n, l, n', l', deriv: 5 x i32][power: i32]
    [value: f64][crc32: u32]``.  Each record is appended with a single
    ``write`` on an O_APPEND descriptor, so concurrent writers never
    interleave inside a record; unreadable records are skipped on load.
    """

    FILENAME = "radial_v1.bin"

    def __init__(self, directory: Path | str | None = None):
        self.directory = Path(directory) if directory else None
        self._mem: dict[RadialIntegralKey, float] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.rejected = 0
        if self.directory is not None:
            self._load()

    @property
    def path(self) -> Path | None:
        return self.directory / self.FILENAME if self.directory else None

    def _load(self):
        p = self.path
        if p is not None and p.exists():
            entries, bad = decode_records(p.read_bytes())
            self._mem.update(entries)
            self.rejected = bad

    def get(self, key: RadialIntegralKey) -> float | None:
        v = self._mem.get(key)
        if v is None:
            self.misses += 1
        else:
            self.hits += 1
        return v

    def put(self, key: RadialIntegralKey, value: float):
        with self._lock:
            if key in self._mem:
                return
            self._mem[key] = value
            if self.directory is None:
                return
            try:
                self.directory.mkdir(parents=True, exist_ok=True)
                fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
                try:
                    os.write(fd, encode_record(key, value))
                finally:
                    os.close(fd)
            except OSError:
                # the cache is an accelerator; losing persistence is not fatal
                self.directory = None

    def __len__(self):
        return len(self._mem)

    def clear(self, remove_file: bool = True):
        with self._lock:
            self._mem.clear()
            if remove_file and self.path is not None and self.path.exists():
                self.path.unlink()

    def stats(self) -> dict:
        return {"entries": len(self._mem), "hits": self.hits, "misses": self.misses,
                "rejected_records": self.rejected,
                "file": str(self.path) if self.path else None}


_cache: RadialCache | None = None


def get_cache() -> RadialCache:
    global _cache
    if _cache is None:
        _cache = RadialCache(default_cache_dir())
    return _cache


def set_cache(cache: RadialCache | None):
    """Install a cache instance (``None`` resets to the default on next use)."""
    global _cache
    _cache = cache


def radial_integral(key: RadialIntegralKey, method: str = "auto") -> float:
    """int_0^inf R_nl(r) r^power [d/dr]^deriv R_n'l'(r) r^2 dr in atomic units.

    ``method``: ``auto`` (quadrature, exact series when cancellation is
    severe; cached), ``quadrature``, ``exact`` or ``check`` (both paths,
    raising if they differ by more than 1e-9 of the term scale).
    """
    key = key.canonical()
    if method == "quadrature":
        return radial_integral_quadrature(key)[0]
    if method == "exact":
        return radial_integral_exact(key)
    if method == "check":
        q, scale = radial_integral_quadrature(key)
        e = radial_integral_exact(key)
        if abs(q - e) > 1e-9 * max(abs(e), 1e-300) and abs(q - e) > 1e-14 * scale:
            raise NumericError(f"quadrature {q!r} vs exact {e!r} for {key}")
        return e
    if method != "auto":
        raise ContractError(f"unknown method {method!r}")
    cache = get_cache()
    v = cache.get(key)
    if v is not None:
        return v
    q, scale = radial_integral_quadrature(key)
    v = q
    if scale > CANCELLATION_LIMIT * abs(q):
        v = radial_integral_exact(key)
    cache.put(key, v)
    return v


def _ri(n, l, n2, l2, power, deriv=False) -> float:
    return radial_integral(RadialIntegralKey(n, l, n2, l2, power, deriv))


# ---------------------------------------------------------------------------
# Angular algebra and vector operators
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1 << 18)
def c1(lp: int, mp: int, q: int, l: int, m: int) -> float:
    """<l' m'| C^1_q |l m> for the rank-1 renormalized spherical harmonic."""
    if mp != m + q or abs(lp - l) != 1 or abs(q) > 1:
        return 0.0
    phase = -1.0 if mp % 2 else 1.0
    return (phase * math.sqrt((2 * lp + 1) * (2 * l + 1))
            * threej(lp, 1, l, 0, 0, 0) * threej(lp, 1, l, -mp, q, m))


def _radial_part(a: SphericalLabel, b: SphericalLabel, kind: str) -> float:
    up = a.l == b.l + 1  # l' = l + 1
    if kind == "r":
        return _ri(a.n, a.l, b.n, b.l, 1)
    if kind == "rhat":
        return _ri(a.n, a.l, b.n, b.l, 0)
    if kind == "grad":
        return _ri(a.n, a.l, b.n, b.l, 0, True) + (-b.l if up else b.l + 1) * _ri(a.n, a.l, b.n, b.l, -1)
    if kind == "rinv_grad":
        return _ri(a.n, a.l, b.n, b.l, -1, True) + (-b.l if up else b.l + 1) * _ri(a.n, a.l, b.n, b.l, -2)
    if kind == "delta_grad":
        # r^-1 grad + rhat r^-1 d/dr : the d/dr piece doubles
        return 2 * _ri(a.n, a.l, b.n, b.l, -1, True) + (-b.l if up else b.l + 1) * _ri(a.n, a.l, b.n, b.l, -2)
    raise ContractError(f"unknown vector kind {kind!r}")


def spherical_component(a: SphericalLabel, b: SphericalLabel, kind: str) -> tuple[int, float]:
    """Return (q, <a|V_q|b>) for the only q = m_a - m_b that can contribute."""
    q = a.m - b.m
    if abs(q) > 1 or abs(a.l - b.l) != 1:
        return q, 0.0
    ang = c1(a.l, a.m, q, b.l, b.m)
    if ang == 0.0:
        return q, 0.0
    return q, ang * _radial_part(a, b, kind)


def _to_cartesian(q: int, v: complex) -> np.ndarray:
    out = np.zeros(3, dtype=complex)
    if v == 0:
        return out
    if q == 0:
        out[2] = v
    elif q == -1:
        out[0] = v / SQRT2
        out[1] = 1j * v / SQRT2
    else:
        out[0] = -v / SQRT2
        out[1] = 1j * v / SQRT2
    return out


def cartesian(a: SphericalLabel, b: SphericalLabel, kind: str) -> np.ndarray:
    """Cartesian components of <a|V|b>; ``grad`` kinds exclude the -i of p."""
    return _to_cartesian(*spherical_component(a, b, kind))


def _check_labels(*labs):
    for lab in labs:
        if not isinstance(lab, SphericalLabel):
            raise ContractError(f"expected SphericalLabel, got {type(lab).__name__}")


def dipole_z(a: SphericalLabel, b: SphericalLabel) -> float:
    _check_labels(a, b)
    if a.m != b.m:
        return 0.0
    return float(spherical_component(a, b, "r")[1])


def position_vector(a, b) -> Vector3:
    return Vector3.from_array(_apply(a, b, lambda x, y: cartesian(x, y, "r")))


def unit_rvec(a, b) -> Vector3:
    return Vector3.from_array(_apply(a, b, lambda x, y: cartesian(x, y, "rhat")))


def _ladder(a: SphericalLabel, b: SphericalLabel) -> tuple[float, float]:
    """(<a|L+|b>, <a|L-|b>)."""
    if a.n != b.n or a.l != b.l:
        return 0.0, 0.0
    l, m = b.l, b.m
    up = math.sqrt(l * (l + 1) - m * (m + 1)) if a.m == m + 1 else 0.0
    down = math.sqrt(l * (l + 1) - m * (m - 1)) if a.m == m - 1 else 0.0
    return up, down


def angular_momentum_x(a, b) -> float:
    if isinstance(a, SphericalLabel) and isinstance(b, SphericalLabel):
        up, down = _ladder(a, b)
        return 0.5 * (up + down)
    return complex(_apply(a, b, lambda x, y: np.array([angular_momentum_x(x, y)]))[0])


def angular_momentum_cart(a: SphericalLabel, b: SphericalLabel) -> np.ndarray:
    up, down = _ladder(a, b)
    lz = float(b.m) if a == b else 0.0
    return np.array([0.5 * (up + down), -0.5j * (up - down), lz])


def angular_momentum(a, b) -> Vector3:
    return Vector3.from_array(_apply(a, b, angular_momentum_cart))


def _energy_of(s) -> float:
    if isinstance(s, SphericalLabel):
        return energy(s.n)
    if s.energy is None:
        raise ContractError("momentum_p needs energy metadata on StateVector inputs")
    return s.energy


def momentum_p(a, b) -> Vector3:
    """<a|p|b> = i (E_a - E_b) <a|r|b> (reduced mass 1).

    Inputs are labels or StateVectors that are eigenstates of the same
    Hamiltonian, with their eigenvalues stored as ``energy``.
    """
    dE = _energy_of(a) - _energy_of(b)
    if dE == 0.0:
        return Vector3(0.0, 0.0, 0.0)
    return Vector3.from_array(1j * dE * _apply(a, b, lambda x, y: cartesian(x, y, "r")))


def momentum_gradient(a, b) -> Vector3:
    """<a|-i grad|b> evaluated directly from the gradient formula."""
    return Vector3.from_array(-1j * _apply(a, b, lambda x, y: cartesian(x, y, "grad")))


def delta_dot_p(a, b) -> Vector3:
    """<a| r^-1 (1 + rhat rhat) . p |b> with p = -i grad."""
    return Vector3.from_array(-1j * _apply(a, b, lambda x, y: cartesian(x, y, "delta_grad")))


P3_VARIANTS = ("p2p", "contracted")


def _p2p_cart(a: SphericalLabel, b: SphericalLabel) -> np.ndarray:
    # <a|p^2 p|b> = 2 E_a <a|p|b> + 2 <a| r^-1 p |b>, from p^2 = 2 (H0 + 1/r)
    grad = cartesian(a, b, "grad")
    rg = cartesian(a, b, "rinv_grad")
    return -2j * (energy(a.n) * grad + rg)


def p2_p(a, b, variant: str = "p2p") -> Vector3:
    """<a| |p|^2 p |b>, or the isotropically contracted triple product.

    The ``contracted`` variant is sum over k-directions of
    k_i k_j (delta_mh - k_m k_h) p_m p_j p_h, which averages to (2/15)|p|^2 p_i.
    """
    if variant not in P3_VARIANTS:
        raise ContractError(f"variant must be one of {P3_VARIANTS}")
    v = _apply(a, b, _p2p_cart)
    if variant == "contracted":
        v = v * (2.0 / 15.0)
    return Vector3.from_array(v)


def _apply(a, b, f: Callable[[SphericalLabel, SphericalLabel], np.ndarray]) -> np.ndarray:
    """Bilinear extension of a label-pair function to StateVectors."""
    ta = a.terms if isinstance(a, StateVector) else [(a, 1.0)]
    tb = b.terms if isinstance(b, StateVector) else [(b, 1.0)]
    out = None
    for la, ca in ta:
        for lb, cb in tb:
            v = np.asarray(f(la, lb))
            term = np.conj(ca) * cb * v
            out = term if out is None else out + term
    if out is None:
        return np.zeros(3, dtype=complex)
    return out


# ---------------------------------------------------------------------------
# Matrices over label lists
# ---------------------------------------------------------------------------

def operator_matrix(rows: Sequence[SphericalLabel], cols: Sequence[SphericalLabel],
                    kind: str, component: int | None = None) -> np.ndarray:
    """Dense matrix of an operator between two label lists.

    ``kind`` is one of ``r``, ``rhat``, ``grad``, ``delta_grad``,
    ``rinv_grad`` (vector kinds, Cartesian ``component`` 0/1/2), ``z``
    (shortcut for r, component 2), ``Lx``, ``Ly``, ``Lz``, or ``p``,
    ``delta_p``, ``p2p`` (which include the factor -i of p).
    """
    scalar = {"z": ("r", 2)}
    if kind in scalar:
        kind, component = scalar[kind]
    M = np.zeros((len(rows), len(cols)), dtype=complex)
    if kind in ("Lx", "Ly", "Lz"):
        c = "xyz".index(kind[1])
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                if a.n == b.n and a.l == b.l and abs(a.m - b.m) <= 1:
                    M[i, j] = angular_momentum_cart(a, b)[c]
        return M
    factor = 1.0
    base = kind
    if kind == "p":
        base, factor = "grad", -1j
    elif kind == "delta_p":
        base, factor = "delta_grad", -1j
    if kind == "p2p":
        for i, a in enumerate(rows):
            for j, b in enumerate(cols):
                if abs(a.l - b.l) == 1 and abs(a.m - b.m) <= 1:
                    M[i, j] = _p2p_cart(a, b)[component]
        return M
    if component is None:
        raise ContractError("vector operator needs a Cartesian component")
    col_index: dict[tuple[int, int], list[int]] = {}
    for j, b in enumerate(cols):
        col_index.setdefault((b.l, b.m), []).append(j)
    for i, a in enumerate(rows):
        for dl in (-1, 1):
            for dm in (-1, 0, 1):
                for j in col_index.get((a.l + dl, a.m + dm), ()):
                    v = cartesian(a, cols[j], base)[component]
                    if v != 0:
                        M[i, j] = factor * v
    return M
