import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rydqed.abraham import _circular_sum
from rydqed.basis import ParabolicLabel, SphericalLabel, circular_parabolic, parabolic_in_sector, manifold_labels, sector_labels
from rydqed.matelem import operator_matrix
from rydqed.perturb import (FieldConfiguration, PhysicsError, StarkSector, get_sector, stark_closed_form,
                            stark_shift_high_orders, stark_shift_order1, stark_state, zeeman_state)


def test_first_order_examples():
    n = 50
    assert stark_shift_order1(ParabolicLabel(0, 0, n - 1), 1.0) == 0.0
    assert stark_shift_order1(ParabolicLabel(1, 0, n - 2), 1.0) == 75.0
    assert stark_shift_order1(ParabolicLabel(0, 1, n - 2), 2.0) == -1.5 * n * 2.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(-3, 3))
def test_expand_reproduces_first_order(n1, n2, m):
    p = ParabolicLabel(n1, n2, m)
    ex = get_sector(m, p.n, p.n + 10).expand(p)
    assert ex.e[1] == pytest.approx(stark_shift_order1(p, 1.0), abs=1e-10 * p.n ** 2)


def test_field_configuration():
    f = FieldConfiguration(1e2, 0.0)
    assert f.expansion_parameter(50) == pytest.approx(0.06, abs=0.005)
    with pytest.raises(ValueError):
        FieldConfiguration(-1.0, 0.0)
    weak = FieldConfiguration(1e2, 3e-5)
    assert weak.zeeman_weak(10, margin=10)
    assert not FieldConfiguration(1e2, 1.0).zeeman_weak(10)
    au = FieldConfiguration.from_au(1e-9, 2e-9)
    assert au.E0_au == pytest.approx(1e-9) and au.B0_au == pytest.approx(2e-9)


@pytest.mark.parametrize("p", [ParabolicLabel(0, 0, 9), ParabolicLabel(1, 0, 8), ParabolicLabel(0, 1, 8),
                               ParabolicLabel(0, 0, 14)])
def test_high_orders_match_closed_form(p):
    # high |m| states have negligible continuum weight, so the discrete sums
    # reproduce the textbook coefficients
    res = stark_shift_high_orders(p, p.n + 20)
    _, e2, e3 = stark_closed_form(p)
    assert res.e1 == pytest.approx(1.5 * p.n * (p.n1 - p.n2), abs=1e-8)
    assert res.e2 == pytest.approx(e2, rel=2e-4)
    if p.n1 == p.n2:
        assert abs(res.e3) < 1e-10 * abs(e2) * p.n ** 3
    else:
        assert res.e3 == pytest.approx(e3, rel=2e-3)
    assert res.basis_cutoff == p.n + 40


def test_ground_state_second_order_is_half_polarizability():
    res = stark_shift_high_orders(ParabolicLabel(0, 0, 0), 12)
    # same truncation on both sides, so agreement is exact up to rounding
    alpha = _circular_sum(1, res.basis_cutoff)
    assert alpha < 4.5
    assert res.e2 == pytest.approx(-alpha / 2, rel=1e-10)


def test_unconverged_sums_are_flagged():
    res = stark_shift_high_orders(ParabolicLabel(0, 0, 0), 11)
    assert not res.converged and res.achieved_tol > 1e-6


@pytest.mark.parametrize("n,m", [(3, 0), (4, 1), (5, 2), (6, 0), (6, 3)])
def test_rs_matches_finite_field_diagonalization(n, m):
    sec = StarkSector(m, n, n + 12)
    E0 = 2e-4 / n ** 5
    w, v = sec.diagonalize(E0)
    for p in parabolic_in_sector(n, m):
        ex = sec.expand(p)
        ept = ex.energy(E0, 3)
        k = int(np.argmin(np.abs(w - ept)))
        assert abs(w[k] - ept) < 50 * abs(ex.e[2]) * (E0 * n ** 5) ** 2 * E0 ** 2 + 1e-13
        psi = ex.state(E0, 2)
        overlap = abs(psi @ v[:, k]) / np.linalg.norm(psi)
        assert 1 - overlap < 1e-4


def test_energy_residual_scales_as_fourth_power():
    sec = StarkSector(1, 4, 16)
    p = ParabolicLabel(2, 0, 1)
    ex = sec.expand(p)
    res = []
    for E0 in (2e-5, 1e-5):
        w, _ = sec.diagonalize(E0)
        ept = ex.energy(E0, 3)
        res.append(np.min(np.abs(w - ept)))
    assert res[0] / res[1] == pytest.approx(16, rel=0.1)


def test_circular_first_order_structure():
    n = 8
    s = stark_state(SphericalLabel(n, n - 1, n - 1), 1e-7, 1, n + 12)
    labs = [lab for lab, _ in s.vector]
    assert all(lab.m == n - 1 for lab in labs)
    # no other manifold-n component than the base label itself
    assert [lab for lab in labs if lab.n == n] == [SphericalLabel(n, n - 1, n - 1)]
    c = dict(s.vector.terms)
    s2 = stark_state(SphericalLabel(n, n - 1, n - 1), 2e-7, 1, n + 12)
    c2 = dict(s2.vector.terms)
    lab = SphericalLabel(n + 1, n, n - 1)
    assert c2[lab] / c[lab] == pytest.approx(2.0, rel=1e-12)


def test_stark_state_rejects_bad_order():
    with pytest.raises(ValueError):
        stark_state(circular_parabolic(5), 1e-7, 3, 20)


def test_zeeman_state_linear_and_changes_m_by_one():
    n = 6
    s = stark_state(circular_parabolic(n), 1e-8, 1, n + 10)
    assert zeeman_state(s, 0.0, n + 10) is s
    z1 = zeeman_state(s, 1e-12, n + 10)
    z2 = zeeman_state(s, 2e-12, n + 10)
    base = dict(s.vector.terms)
    d1 = {k: v - base.get(k, 0.0) for k, v in z1.vector.terms}
    d2 = {k: v - base.get(k, 0.0) for k, v in z2.vector.terms}
    for k, v in d1.items():
        if k.m != n - 1:
            assert abs(k.m - (n - 1)) == 1
            if abs(v) > 1e-30:
                assert d2[k] / v == pytest.approx(2.0, rel=1e-8)


def test_zeeman_vanishes_outside_manifold_without_field():
    n = 5
    rows = sector_labels(n - 2, n + 6)
    col = [SphericalLabel(n, n - 1, n - 1)]
    lx = operator_matrix(rows, col, "Lx")
    for i, lab in enumerate(rows):
        if lab.n != n:
            assert lx[i, 0] == 0.0


def test_zeeman_degenerate_coupling_is_fatal():
    # without an electric field the m +- 1 neighbours in the same manifold are
    # exactly degenerate and Lx couples to them
    s = stark_state(ParabolicLabel(0, 0, 1), 0.0, 1, 12)
    with pytest.raises(PhysicsError):
        zeeman_state(s, 1e-9, 12)


def test_manifold_labels_partition():
    n = 4
    assert len(manifold_labels(n)) == n * n
