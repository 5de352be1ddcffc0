import json
import math
from fractions import Fraction

import pytest

from nearcrit.errors import BackendDomainError
from nearcrit.scales import (
    T_C,
    AnalyticBackend,
    EmpiricalBackend,
    arm_scaling_ratio,
    asymptotic_m_k,
    backend_from_dict,
    delta_k,
    epsilon_tilde_M,
    exceptional_sequence,
    p_of_t,
    psi,
    psi_eps,
    psi_inverse,
    recursion_residual,
    t_infinity_eps,
    t_of_p,
)


@pytest.fixture
def analytic():
    return AnalyticBackend()


def test_critical_time_maps_to_one_half():
    assert p_of_t(T_C) == pytest.approx(0.5, abs=1e-15)
    assert t_of_p(0.5) == pytest.approx(T_C, abs=1e-15)
    for t in (1e-6, 0.3, 1.0, 5.0):
        assert t_of_p(p_of_t(t)) == pytest.approx(t, rel=1e-12)


def test_time_conversions_reject_out_of_range():
    with pytest.raises(ValueError):
        p_of_t(-0.1)
    with pytest.raises(ValueError):
        t_of_p(1.0)


def test_delta_k_is_exact():
    assert delta_k(0) == 0
    assert delta_k(1) == Fraction(3, 8)
    assert delta_k(2) == Fraction(36, 55) * (1 - Fraction(41, 96) ** 2)
    assert all(delta_k(k) < delta_k(k + 1) < Fraction(36, 55) for k in range(8))
    with pytest.raises(ValueError):
        delta_k(-1)


@pytest.mark.parametrize("zeta", [1e-3, 1e-6])
def test_first_asymptotic_scale_is_inverse_square_root(zeta):
    assert asymptotic_m_k(zeta, 1) * math.sqrt(zeta) == pytest.approx(1.0, rel=1e-12)
    assert asymptotic_m_k(zeta, 0) == 1.0


def test_L_is_symmetric_around_critical_time(analytic):
    assert analytic.L(t_of_p(0.4)) == pytest.approx(analytic.L(t_of_p(0.6)), rel=1e-9)
    with pytest.raises(BackendDomainError):
        analytic.L(T_C)


def test_theta_vanishes_below_critical_time(analytic):
    assert analytic.theta(T_C) == 0.0
    assert analytic.theta(0.2) == 0.0
    assert analytic.theta(T_C + 0.5) == pytest.approx(0.5 ** (5.0 / 36.0))


def test_L_inverse_matches_power_law(analytic):
    for eps in (1e-4, 0.1, 0.6):
        assert analytic.L_inverse_eps(analytic.L_eps(eps)) == pytest.approx(eps, rel=1e-10)


def test_psi_has_closed_form_for_power_laws(analytic):
    zeta = 1e-4
    for eps in (0.01, 0.1, 0.5):
        expected = (eps ** (8.0 / 3.0) / zeta) ** (36.0 / 41.0)
        assert psi_eps(zeta, eps, analytic) == pytest.approx(expected, rel=1e-8)


def test_psi_inverse_undoes_psi(analytic):
    zeta = 1e-4
    t = T_C + 0.2
    assert psi_inverse(zeta, psi(zeta, t, analytic), analytic) == pytest.approx(t, rel=1e-9)


def test_psi_needs_supercritical_time(analytic):
    with pytest.raises(BackendDomainError):
        psi(1e-4, T_C, analytic)
    with pytest.raises(ValueError):
        psi_eps(0.0, 0.1, analytic)


@pytest.mark.parametrize("zeta", [1e-3, 1e-5])
def test_fixed_point_offset(zeta, analytic):
    assert t_infinity_eps(zeta, analytic) == pytest.approx(zeta ** (36.0 / 55.0), rel=1e-8)


# =============================================================================
# EXCEPTIONAL SEQUENCE
# =============================================================================

@pytest.mark.parametrize("zeta", [1e-4, 1e-6])
def test_first_exceptional_scale_constant(zeta, analytic):
    table = exceptional_sequence(zeta, 1, analytic)
    assert table.rows[0].eps_k == T_C
    assert table.rows[0].t_k == pytest.approx(2 * T_C)
    assert table.rows[1].m_k * math.sqrt(zeta) == pytest.approx(math.log(2.0) ** (-41.0 / 72.0), rel=1e-6)
    assert table.rows[1].m_k_asymptotic * math.sqrt(zeta) == pytest.approx(1.0, rel=1e-12)


def test_exceptional_times_decrease_towards_fixed_point(analytic):
    table = exceptional_sequence(1e-4, 6, analytic)
    times = [row.t_k for row in table.rows]
    assert all(a > b for a, b in zip(times, times[1:]))
    assert times[-1] > table.t_inf
    scales = [row.m_k for row in table.rows]
    assert all(a < b for a, b in zip(scales, scales[1:]))


def test_recursion_holds_on_every_row(analytic):
    table = exceptional_sequence(1e-5, 5, analytic)
    for k in range(1, 6):
        assert recursion_residual(table, analytic, k) == pytest.approx(1.0, rel=1e-6)


def test_large_zeta_has_no_sequence(analytic):
    with pytest.raises(BackendDomainError):
        exceptional_sequence(1.0, 3, analytic)


def test_scale_table_serialisation(analytic):
    table = exceptional_sequence(1e-4, 2, analytic)
    lines = table.to_csv().splitlines()
    assert lines[0] == "k,t_k,eps_k,m_k,delta_k,m_k_asymptotic"
    assert len(lines) == 4
    data = json.loads(table.to_json())
    assert data["backend"]["kind"] == "analytic"
    assert data["rows"][1]["delta_k_exact"] == "3/8"


@pytest.mark.parametrize("M", [10.0, 1e3])
def test_epsilon_tilde_closed_form(M, analytic):
    zeta = 1e-6
    eps_tilde, m_tilde = epsilon_tilde_M(zeta, M, analytic)
    assert eps_tilde == pytest.approx((M ** -2.0 / zeta) ** (36.0 / 41.0), rel=1e-8)
    assert m_tilde == pytest.approx(analytic.L_eps(eps_tilde), rel=1e-12)


@pytest.mark.parametrize("M", [10.0, 1e3, 1e5])
def test_arm_scaling_ratio_is_one_for_power_laws(M, analytic):
    assert arm_scaling_ratio(1e-6, M, analytic) == pytest.approx(1.0, rel=1e-6)


# =============================================================================
# EMPIRICAL BACKEND
# =============================================================================

def _tables(backend, ps):
    L_table = [(p, backend.L_eps(t_of_p(p) - T_C)) for p in ps]
    theta_table = [(p, backend.theta_eps(t_of_p(p) - T_C)) for p in ps]
    return L_table, theta_table


def test_empirical_backend_reproduces_its_points(analytic):
    L_table, theta_table = _tables(analytic, [0.55, 0.6, 0.7, 0.8, 0.9])
    empirical = EmpiricalBackend(L_table, theta_table)
    for p, value in L_table:
        assert empirical.L_eps(t_of_p(p) - T_C) == pytest.approx(value, rel=1e-6)
    # tails extend with the analytic exponents
    assert empirical.L_eps(1e-4) == pytest.approx(analytic.L_eps(1e-4), rel=1e-6)
    assert empirical.theta_eps(5.0) == pytest.approx(analytic.theta_eps(5.0), rel=1e-6)


def test_empirical_backend_forces_monotone_values():
    L_table = [(0.55, 100.0), (0.6, 120.0), (0.7, 20.0), (0.8, 8.0)]
    theta_table = [(0.55, 0.5), (0.6, 0.4), (0.7, 0.7), (0.8, 0.8)]
    backend = EmpiricalBackend(L_table, theta_table)
    offsets = sorted(t_of_p(p) - T_C for p in (0.55, 0.57, 0.6, 0.65, 0.7, 0.75, 0.8))
    lengths = [backend.L_eps(e) for e in offsets]
    thetas = [backend.theta_eps(e) for e in offsets]
    assert all(a > b for a, b in zip(lengths, lengths[1:]))
    assert all(a < b for a, b in zip(thetas, thetas[1:]))


def test_empirical_backend_mirrors_subcritical_lengths():
    mirrored = EmpiricalBackend([(0.45, 50.0), (0.3, 5.0)], [(0.6, 0.5), (0.8, 0.9)])
    direct = EmpiricalBackend([(0.55, 50.0), (0.7, 5.0)], [(0.6, 0.5), (0.8, 0.9)])
    eps = t_of_p(0.6) - T_C
    assert mirrored.L_eps(eps) == pytest.approx(direct.L_eps(eps), rel=1e-9)


def test_empirical_backend_needs_two_points():
    with pytest.raises(BackendDomainError):
        EmpiricalBackend([(0.6, 10.0)], [(0.6, 0.5), (0.7, 0.6)])


def test_backend_from_dict(analytic):
    assert backend_from_dict({"kind": "analytic", "a_L": 2.0}).L_eps(1.0) == 2.0
    L_table, theta_table = _tables(analytic, [0.6, 0.7, 0.8])
    empirical = EmpiricalBackend(L_table, theta_table)
    rebuilt = backend_from_dict(json.loads(json.dumps(empirical.to_dict())))
    assert rebuilt.L_eps(0.3) == pytest.approx(empirical.L_eps(0.3))
    with pytest.raises(BackendDomainError):
        backend_from_dict({"kind": "tabulated"})
