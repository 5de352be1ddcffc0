import math

import numpy as np
import pytest

from nearcrit.forestfire import (
    FireOptions,
    circuit_radii,
    default_y_pad,
    estimate_burning_prob,
    estimate_burning_prob_circuits,
    measure_rho_pi,
    neighbor_table,
    origin_burns,
    sample_local_cluster,
    simulate_ffwor,
    simulate_pure_birth,
    simulate_Y,
)
from nearcrit.lattice import Window, count_sites, window_mask
from nearcrit.percolation import BURNT, OCCUPIED, label_mask
from nearcrit.scales import T_C, AnalyticBackend
from nearcrit.services.seeding import make_rng


@pytest.fixture
def box():
    return Window.box(12)


# =============================================================================
# OPTIONS
# =============================================================================

def test_options_validation(box):
    with pytest.raises(ValueError):
        FireOptions(zeta=-0.1, t_end=1.0, region=box)
    with pytest.raises(ValueError):
        FireOptions(zeta=0.1, t_end=math.inf, region=box)
    with pytest.raises(ValueError):
        FireOptions(zeta=0.1, t_end=1.0, region=box, until_all_burnt=True, recovery=True)
    with pytest.raises(ValueError):
        FireOptions(zeta=0.0, t_end=1.0, region=box, until_all_burnt=True)
    with pytest.raises(ValueError):
        FireOptions(zeta=0.1, t_end=1.0, region=box, stop_ignitions_at=2.0)
    assert FireOptions(zeta=0.1, t_end=1.0, region=box, until_all_burnt=True).t_end == math.inf


# =============================================================================
# PURE BIRTH
# =============================================================================

def test_pure_birth_at_time_zero_is_empty(box):
    config = simulate_pure_birth(box, 0.0, seed=1)
    assert not config.occupied().any()


def test_pure_birth_is_monotone_in_time(box):
    early = simulate_pure_birth(box, 0.3, seed=5).occupied()
    late = simulate_pure_birth(box, 1.2, seed=5).occupied()
    assert np.all(late[early])
    assert late.sum() > early.sum()


def test_pure_birth_rejects_negative_time(box):
    with pytest.raises(ValueError):
        simulate_pure_birth(box, -1.0, seed=0)


def test_neighbor_table_is_symmetric(box):
    grid, mask = window_mask(box)
    table = neighbor_table(grid, mask)
    for f in np.flatnonzero(mask.ravel())[:50]:
        for j in table[f]:
            if j >= 0:
                assert f in table[j]
    assert np.all(table[~mask.ravel()] == -1)


# =============================================================================
# FOREST FIRE
# =============================================================================

def test_zero_lightning_is_pure_birth(box):
    timeline = simulate_ffwor(FireOptions(zeta=0.0, t_end=1.5, region=box), seed=3)
    assert timeline.burns == []
    assert timeline.ignition_times.size == 0
    assert np.array_equal(timeline.final.state, simulate_pure_birth(box, 1.5, seed=3).state)


def test_runs_are_deterministic(box):
    opts = FireOptions(zeta=0.05, t_end=2.0, region=box)
    first = simulate_ffwor(opts, seed=11)
    second = simulate_ffwor(opts, seed=11)
    assert first.burn_rows() == second.burn_rows()
    assert first.to_json() == second.to_json()


def test_burnt_sets_are_occupied_clusters(box):
    seen = []

    def observer(state, event):
        label, _ = label_mask(state == OCCUPIED)
        flat = label.ravel()
        f = int(event.sites[0])
        assert np.array_equal(np.flatnonzero(flat == flat[f]), event.sites)
        seen.append(event)

    timeline = simulate_ffwor(FireOptions(zeta=0.05, t_end=3.0, region=box), seed=2, observer=observer)
    assert len(seen) == len(timeline.burns) > 0
    for event in timeline.burns:
        assert timeline.grid.flat_index(event.site) in event.sites
        assert np.all(timeline.final.state.ravel()[event.sites] == BURNT)
        assert np.all(timeline.final.burn_time.ravel()[event.sites] == event.time)


def test_ignitions_stop_at_cutoff(box):
    opts = FireOptions(zeta=0.1, t_end=3.0, region=box, stop_ignitions_at=1.0)
    timeline = simulate_ffwor(opts, seed=4)
    assert timeline.ignition_times.size > 0
    assert timeline.ignition_times.max() <= 1.0
    assert all(e.time <= 1.0 for e in timeline.burns)


def test_no_ignitions_after_time_zero_is_pure_birth(box):
    timeline = simulate_ffwor(FireOptions(zeta=0.5, t_end=1.0, region=box, stop_ignitions_at=0.0), seed=3)
    assert timeline.burns == []
    assert np.array_equal(timeline.final.state, simulate_pure_birth(box, 1.0, seed=3).state)


def test_occupied_density_drops_and_recovers(box):
    timeline = simulate_ffwor(FireOptions(zeta=0.05, t_end=3.0, region=box), seed=2)
    times = [e.time for e in timeline.burns] + [timeline.end_time]
    found = False
    for event, later in zip(timeline.burns, times[1:]):
        after = int(timeline.state_at(event.time).occupied().sum())
        assert after < event.occupied_before
        if later > event.time and int(timeline.state_at(later - 1e-9).occupied().sum()) > after:
            found = True
    assert found


def test_run_until_everything_burnt():
    region = Window.box(8)
    timeline = simulate_ffwor(FireOptions(zeta=0.5, t_end=0.0, region=region, until_all_burnt=True), seed=9)
    final = timeline.final
    assert np.all(final.state[final.mask] == BURNT)
    assert math.isfinite(timeline.end_time)


def test_burn_boundary_kills_the_outer_ring(box):
    opts = FireOptions(zeta=0.05, t_end=3.0, region=box, burn_boundary=True)
    timeline = simulate_ffwor(opts, seed=6)
    assert timeline.burns
    grid, mask = window_mask(box)
    table = neighbor_table(grid, mask)
    state = timeline.final.state.ravel()
    for event in timeline.burns:
        ring = np.unique(table[event.sites].ravel())
        ring = ring[ring >= 0]
        assert not np.any(state[ring] == OCCUPIED)


def test_state_at_rebuilds_history(box):
    timeline = simulate_ffwor(FireOptions(zeta=0.05, t_end=2.0, region=box), seed=8)
    assert np.array_equal(timeline.state_at(2.0).state, timeline.final.state)
    assert not timeline.state_at(0.0).occupied().any()


def test_recovery_regrows_burnt_sites(box):
    opts = FireOptions(zeta=0.2, t_end=4.0, region=box, recovery=True)
    timeline = simulate_ffwor(opts, seed=1)
    assert timeline.burns
    assert timeline.rebirths > 0
    assert not np.any(timeline.final.state == BURNT)
    with pytest.raises(ValueError):
        timeline.state_at(1.0)


def test_origin_burns_respects_interval(box):
    timeline = simulate_ffwor(FireOptions(zeta=0.1, t_end=3.0, region=box), seed=12)
    origin = timeline.grid.flat_index((0, 0))
    times = [e.time for e in timeline.burns if origin in e.sites]
    if times:
        assert origin_burns(timeline, 0.0, 3.0)
        assert not origin_burns(timeline, 0.0, times[0] / 2)
    else:
        assert not origin_burns(timeline, 0.0, 3.0)


def test_burning_probability_without_lightning():
    result = estimate_burning_prob(0.0, 8, 0.8, 1.5, n_runs=5, seed=0)
    assert result.p_hat == 0.0
    with pytest.raises(ValueError):
        estimate_burning_prob(0.1, 8, 1.0, 1.0, n_runs=5, seed=0)


@pytest.mark.parametrize("t_lo", [0.5, T_C])
def test_burning_window_must_start_after_criticality(t_lo):
    with pytest.raises(ValueError):
        estimate_burning_prob(0.1, 8, t_lo, 2.0, n_runs=5, seed=0)
    with pytest.raises(ValueError):
        estimate_burning_prob_circuits(0.1, 2, 4, t_lo, 2.0, n_runs=5, seed=0)


def test_circuit_radii():
    assert circuit_radii(1, 16, 5) == [1.0, 2.0, 4.0, 8.0, 16.0]
    with pytest.raises(ValueError):
        circuit_radii(8, 8, 3)


# =============================================================================
# LOCAL CLUSTERS AND Y-PROCESS
# =============================================================================

def test_local_cluster_extremes():
    rng = make_rng(0)
    empty = sample_local_cluster(0.0, 3, rng)
    assert empty.sites.size == 0
    assert empty.radius == 0.0
    assert not empty.clipped
    full = sample_local_cluster(1.0, 3, rng)
    assert full.clipped
    assert full.sites.shape[0] == count_sites(Window.ball(3))
    assert full.boundary.size == 0


def test_y_without_marks_is_pure_birth(box):
    result = simulate_Y(box, 0.0, 1.0, seed=4)
    assert result.marks == 0
    assert np.array_equal(result.config.state, simulate_pure_birth(box, 1.0, seed=4).state)


def test_y_only_removes_sites(box):
    result = simulate_Y(box, 0.1, 1.0, seed=4, pad=6)
    pure = simulate_pure_birth(box, 1.0, seed=4).occupied()
    occupied = result.config.occupied()
    assert np.all(pure[occupied])
    assert result.marks > 0
    assert result.removed_clusters <= result.marks
    assert np.all(result.config.state[result.config.mask] != BURNT)


def test_y_rejects_negative_arguments(box):
    with pytest.raises(ValueError):
        simulate_Y(box, -0.1, 1.0, seed=0)


# =============================================================================
# INDUCED HOLE LAW
# =============================================================================

def test_rho_pi_measurement():
    zeta, eps = 0.2, 0.3
    measured = measure_rho_pi(zeta, eps, Window.ball(4), n_runs=4, seed=2, m=8.0)
    assert measured.pi_expected == pytest.approx(-math.expm1(-zeta * (T_C - eps)))
    assert 0.0 <= measured.pi_hat <= 1.0
    assert measured.radii.size > 0
    grid = [1.0, 2.0, 3.0, 5.0, 8.0]
    rho = measured.rho_hat(grid)
    assert rho[0] == pytest.approx(np.mean(measured.radii >= 1.0))
    assert np.all(np.diff(rho) <= 0)
    assert np.all(measured.envelope(np.array(grid)) <= 1.0)
    assert [row["r"] for row in measured.rows(grid)] == grid


def test_rho_pi_needs_subcritical_horizon():
    with pytest.raises(ValueError):
        measure_rho_pi(0.1, T_C, Window.ball(2), n_runs=1, seed=0)


def test_rho_pi_takes_scale_from_backend():
    eps = 0.3
    backend = AnalyticBackend(a_L=2.0)
    measured = measure_rho_pi(0.1, eps, Window.ball(2), n_runs=1, seed=0, backend=backend)
    assert measured.m == pytest.approx(2.0 * AnalyticBackend().L(T_C - eps))


def test_marked_sites_with_vacant_origin_have_radius_zero():
    # at tiny p nearly every mark finds a vacant origin
    measured = measure_rho_pi(500.0, T_C - 1e-3, Window.ball(3), n_runs=2, seed=1, m=4.0)
    assert np.any(measured.radii == 0.0)
    assert measured.rho_hat([1.0])[0] < 1.0


def test_y_pad_uses_backend_length(box, monkeypatch):
    backend = AnalyticBackend()
    calls = []

    def fake_L(t):
        calls.append(t)
        return 3.0

    monkeypatch.setattr(backend, "L", fake_L)
    assert default_y_pad(0.2, backend) == 6.0
    calls.clear()
    result = simulate_Y(box, 0.5, 1.0, seed=0, backend=backend)
    assert result.marks > 0
    assert len(calls) == result.marks
