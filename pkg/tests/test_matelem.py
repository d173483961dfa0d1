import math
import os
import threading

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import eval_genlaguerre, gammaln

from rydqed import matelem
from rydqed.basis import ParabolicLabel, SphericalLabel as S, StateVector, parabolic_to_spherical, sector_labels
from rydqed.matelem import (RECORD_SIZE, ContractError, RadialCache, RadialIntegralKey, angular_momentum,
                            decode_records, delta_dot_p, dipole_z, encode_record, momentum_gradient,
                            momentum_p, operator_matrix, p2_p, position_vector, radial_integral,
                            radial_integral_exact, radial_function)


def R_scipy(n, l, r):
    """Independent radial function from scipy's generalized Laguerre polynomial."""
    lognorm = 0.5 * (3 * math.log(2 / n) + gammaln(n - l) - math.log(2 * n) - gammaln(n + l + 1))
    rho = 2 * r / n
    return np.exp(lognorm) * np.exp(-rho / 2) * rho ** l * eval_genlaguerre(n - l - 1, 2 * l + 1, rho)


@pytest.mark.parametrize("n,l", [(1, 0), (2, 1), (4, 2), (7, 0), (12, 11)])
def test_radial_function_matches_scipy(n, l):
    r = np.linspace(0.1, 4 * n * n, 50)
    assert np.allclose(radial_function(n, l, r), R_scipy(n, l, r), rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("n,l", [(1, 0), (3, 1), (6, 5), (10, 3), (25, 24)])
def test_diagonal_expectation_values(n, l):
    ri = lambda p: radial_integral(RadialIntegralKey(n, l, n, l, p))  # noqa: E731
    assert ri(0) == pytest.approx(1.0, rel=1e-12)
    assert ri(1) == pytest.approx((3 * n * n - l * (l + 1)) / 2, rel=1e-12)
    assert ri(2) == pytest.approx(n * n * (5 * n * n + 1 - 3 * l * (l + 1)) / 2, rel=1e-12)
    assert ri(-1) == pytest.approx(1 / n ** 2, rel=1e-12)
    assert ri(-2) == pytest.approx(1 / (n ** 3 * (l + 0.5)), rel=1e-12)


@pytest.mark.parametrize("key", [
    RadialIntegralKey(1, 0, 2, 1, 1), RadialIntegralKey(3, 2, 5, 1, 1), RadialIntegralKey(4, 1, 6, 2, 0),
    RadialIntegralKey(2, 1, 3, 0, -1, True), RadialIntegralKey(5, 3, 4, 2, -2),
])
def test_radial_integral_against_scipy_quad(key):
    if key.deriv:
        h = 1e-5
        f = lambda r: (R_scipy(key.n, key.l, r) * r ** (2 + key.power)  # noqa: E731
                       * (R_scipy(key.n_prime, key.l_prime, r + h) - R_scipy(key.n_prime, key.l_prime, r - h)) / (2 * h))
        tol = 1e-7
    else:
        f = lambda r: R_scipy(key.n, key.l, r) * R_scipy(key.n_prime, key.l_prime, r) * r ** (2 + key.power)  # noqa: E731
        tol = 1e-10
    ref, _ = integrate.quad(f, 1e-12, 400, limit=400, epsabs=1e-14)
    assert radial_integral(key) == pytest.approx(ref, rel=tol, abs=1e-12)


def test_known_dipole_value():
    # <1s| r |2p> radial integral = 128 sqrt(6) / 243
    assert radial_integral(RadialIntegralKey(1, 0, 2, 1, 1)) == pytest.approx(128 * math.sqrt(6) / 243, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.data())
def test_quadrature_matches_exact_series(n, n2, data):
    l = data.draw(st.integers(0, n - 1))
    l2 = data.draw(st.integers(0, n2 - 1))
    p = data.draw(st.sampled_from([-1, 0, 1, 2] if l + l2 == 0 else [-2, -1, 0, 1, 2]))
    key = RadialIntegralKey(n, l, n2, l2, p)
    q = radial_integral(key, method="auto")
    e = radial_integral_exact(key)
    scale = max(1.0, float(n * n2)) ** max(p, 0)
    assert abs(q - e) <= 1e-9 * max(abs(e), 1e-6 * scale)


def test_radial_key_contract():
    with pytest.raises(ContractError):
        RadialIntegralKey(2, 2, 3, 0, 1)
    with pytest.raises(ContractError):
        RadialIntegralKey(2, 1, 3, 0, 3)
    k = RadialIntegralKey(5, 2, 3, 1, 1)
    assert k.canonical() == RadialIntegralKey(3, 1, 5, 2, 1)
    kd = RadialIntegralKey(5, 2, 3, 1, 0, True)
    assert kd.canonical() == kd


# ---------------------------------------------------------------------------
# angular algebra and operators
# ---------------------------------------------------------------------------

def test_selection_rules():
    assert dipole_z(S(3, 1, 0), S(3, 1, 0)) == 0.0
    assert dipole_z(S(3, 2, 1), S(4, 1, 0)) == 0.0
    assert dipole_z(S(3, 2, 0), S(3, 0, 0)) == 0.0
    assert position_vector(S(3, 2, 2), S(3, 1, 0)).norm() == 0.0
    assert dipole_z(S(2, 1, 0), S(2, 0, 0)) == pytest.approx(-3.0, rel=1e-13)


@pytest.mark.parametrize("kind,comp", [("r", 0), ("r", 1), ("r", 2), ("p", 0), ("p", 1), ("p", 2),
                                       ("delta_p", 0), ("delta_p", 1), ("delta_p", 2),
                                       ("p2p", 0), ("p2p", 2), ("Lx", None), ("Ly", None)])
def test_hermiticity(kind, comp):
    labs = sector_labels(0, 5) + sector_labels(1, 5) + sector_labels(-1, 5)
    M = operator_matrix(labs, labs, kind, comp)
    assert np.max(np.abs(M - M.conj().T)) < 1e-12 * max(1.0, np.max(np.abs(M)))


def test_momentum_commutator_matches_gradient():
    pairs = [(S(2, 1, 1), S(3, 2, 0)), (S(5, 4, 3), S(7, 3, 2)), (S(10, 9, 9), S(12, 8, 8))]
    for a, b in pairs:
        assert np.allclose(momentum_p(a, b).to_array(), momentum_gradient(a, b).to_array(), atol=1e-12)


def test_momentum_between_degenerate_states_vanishes():
    a = parabolic_to_spherical(ParabolicLabel(0, 0, 4))
    b = parabolic_to_spherical(ParabolicLabel(1, 0, 3))
    assert momentum_p(a, b).norm() == 0.0
    assert momentum_gradient(a, b).norm() < 1e-12


def test_momentum_needs_energies():
    sv = StateVector([(S(2, 1, 0), 1.0)])
    with pytest.raises(ContractError):
        momentum_p(sv, S(2, 0, 0))


def test_angular_momentum_circular():
    L = angular_momentum(S(6, 5, 5), S(6, 5, 5))
    assert L.z == 5 and L.x == 0 and L.y == 0
    lp = angular_momentum(S(3, 2, 1), S(3, 2, 0))
    assert lp.x == pytest.approx(math.sqrt(6) / 2)
    assert lp.y == pytest.approx(-1j * math.sqrt(6) / 2)


def test_delta_dot_p_hermitian_pair():
    a, b = S(4, 2, 1), S(5, 3, 2)
    assert np.allclose(delta_dot_p(a, b).to_array(), np.conj(delta_dot_p(b, a).to_array()), atol=1e-13)


def _sympy_p2pz(psi_a, psi_b):
    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x ** 2 + y ** 2 + z ** 2)
    fa, fb = psi_a(r, z), psi_b(r, z)
    d = sp.diff(fb, z)
    lap = sp.diff(d, x, 2) + sp.diff(d, y, 2) + sp.diff(d, z, 2)
    R, th, ph = sp.symbols("R theta phi", positive=True)
    g = sp.simplify((sp.I * fa * lap).subs({x: R * sp.sin(th) * sp.cos(ph), y: R * sp.sin(th) * sp.sin(ph),
                                            z: R * sp.cos(th)}))
    val = sp.integrate(sp.integrate(sp.integrate(g * R ** 2 * sp.sin(th), (ph, 0, 2 * sp.pi)),
                                    (th, 0, sp.pi)), (R, 0, sp.oo))
    return complex(sp.N(val, 20))


psi_1s = lambda r, z: sp.exp(-r) / sp.sqrt(sp.pi)  # noqa: E731
psi_2s = lambda r, z: (1 - r / 2) * sp.exp(-r / 2) / sp.sqrt(8 * sp.pi)  # noqa: E731
psi_2p0 = lambda r, z: z * sp.exp(-r / 2) / (4 * sp.sqrt(2 * sp.pi))  # noqa: E731


@pytest.mark.parametrize("a,psi_a", [(S(2, 0, 0), psi_2s), (S(1, 0, 0), psi_1s)])
def test_p2p_against_symbolic_oracle(a, psi_a):
    expected = _sympy_p2pz(psi_a, psi_2p0)
    got = p2_p(a, S(2, 1, 0)).z
    assert got == pytest.approx(expected, abs=1e-12)


def test_p2p_degenerate_pair_is_nonzero():
    # p^2 p is not a commutator with H, so degenerate pairs need not vanish
    assert abs(p2_p(S(2, 0, 0), S(2, 1, 0)).z) == pytest.approx(1 / 12, rel=1e-12)


def test_p2p_contracted_variant():
    a, b = S(3, 1, 0), S(4, 2, 1)
    full = p2_p(a, b).to_array()
    assert np.allclose(p2_p(a, b, "contracted").to_array(), 2 / 15 * full)
    with pytest.raises(ContractError):
        p2_p(a, b, "cubed")


# ---------------------------------------------------------------------------
# persistent cache
# ---------------------------------------------------------------------------

def test_cache_roundtrip(tmp_path):
    c = RadialCache(tmp_path)
    k = RadialIntegralKey(3, 1, 4, 2, 1)
    c.put(k, 1.25)
    c.put(k, 9.0)  # first value wins
    assert c.path.stat().st_size == RECORD_SIZE
    c2 = RadialCache(tmp_path)
    assert c2.get(k) == 1.25 and c2.hits == 1


def test_cache_rejects_corrupt_records(tmp_path):
    k1, k2 = RadialIntegralKey(3, 1, 4, 2, 1), RadialIntegralKey(2, 0, 2, 1, 1)
    blob = bytearray(encode_record(k1, 1.0) + encode_record(k2, 2.0))
    blob[RECORD_SIZE + 30] ^= 0xFF  # corrupt the second value
    blob += b"\x01\x02"             # torn tail
    entries, bad = decode_records(bytes(blob))
    assert entries == {k1: 1.0} and bad == 2
    (tmp_path / RadialCache.FILENAME).write_bytes(bytes(blob))
    assert RadialCache(tmp_path).rejected == 2


def test_cache_concurrent_appends(tmp_path):
    c = RadialCache(tmp_path)
    keys = [RadialIntegralKey(n, 0, n + 1, 1, 1) for n in range(1, 41)]

    def work(sub):
        for k in sub:
            c.put(k, float(k.n))

    threads = [threading.Thread(target=work, args=(keys[i::4],)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    entries, bad = decode_records(c.path.read_bytes())
    assert bad == 0 and len(entries) == 40


def test_cache_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("RYDQED_CACHE_DIR", str(tmp_path))
    assert matelem.default_cache_dir() == tmp_path
    monkeypatch.setenv("RYDQED_CACHE_DIR", "")
    assert matelem.default_cache_dir() is None
    assert os.environ["RYDQED_CACHE_DIR"] == ""
