import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from nearcrit.errors import UndecidedError, WindowError
from nearcrit.estimators import estimate_crossing, estimate_L, estimate_theta
from nearcrit.lattice import Window, annulus_geometry, embed, neighbors
from nearcrit.percolation import (
    OCCUPIED,
    VACANT,
    Color,
    Orientation,
    SiteConfig,
    cluster_of,
    detect_circuit,
    detect_crossing,
    detect_net,
    label_clusters,
    largest_cluster,
    net_window,
    sample,
)


def test_sample_extremes():
    window = Window.ball(6)
    assert sample(window, 0.0, 1).occupied().sum() == 0
    full = sample(window, 1.0, 1)
    assert full.occupied().sum() == full.n_sites


def test_sample_is_deterministic():
    window = Window.ball(10)
    a = sample(window, 0.5, 42)
    b = sample(window, 0.5, 42)
    c = sample(window, 0.5, 43)
    assert np.array_equal(a.state, b.state)
    assert not np.array_equal(a.state, c.state)


def test_sample_rejects_bad_p():
    with pytest.raises(ValueError):
        sample(Window.ball(2), 1.5, 0)


def test_hex_duality_exhaustive():
    # Exactly one of: occupied left-right crossing, vacant bottom-top crossing.
    window = Window.parallelogram(0, 3, 0, 2)
    config = SiteConfig.empty(window)
    n = config.n_sites
    assert n == 12
    for bits in itertools.product((VACANT, OCCUPIED), repeat=n):
        config.state[config.mask] = bits
        horizontal = detect_crossing(config, window, Orientation.HORIZONTAL, Color.OCCUPIED)
        vertical = detect_crossing(config, window, Orientation.VERTICAL, Color.VACANT)
        assert horizontal != vertical


def test_rhombus_crossing_is_one_half():
    rhombus = Window.parallelogram(0, 7, 0, 7)
    est = estimate_crossing(rhombus, 0.5, 2000, seed=7)
    assert abs(est.p_hat - 0.5) <= 4 * est.std_err


def test_crossing_outside_configuration():
    config = sample(Window.ball(3), 0.5, 0)
    with pytest.raises(WindowError):
        detect_crossing(config, Window.rectangle(0, 10, 0, 2))


def test_circuits_in_filled_annulus():
    annulus = Window.annulus(2, 6)
    full = SiteConfig.filled(Window.ball(6))
    empty = SiteConfig.empty(Window.ball(6))
    assert detect_circuit(full, annulus, Color.OCCUPIED)
    assert not detect_circuit(full, annulus, Color.VACANT)
    assert detect_circuit(empty, annulus, Color.VACANT)


def test_circuit_blocked_by_radial_cut():
    window = Window.ball(6)
    config = SiteConfig.filled(window)
    # Vacate the positive x axis: no occupied circuit survives.
    for x in range(0, 8):
        if window.contains((x, 0)):
            config.set_value((x, 0), VACANT)
    assert not detect_circuit(config, Window.annulus(2, 6), Color.OCCUPIED)


def _bfs_crossing(config, rect, orientation, color):
    """Breadth-first search from one side of a parallelogram to the opposite one."""
    x0, x1, y0, y1 = rect.extents
    colored = {v for v in config.sites(color) if rect.contains(v)}
    if orientation == Orientation.HORIZONTAL:
        frontier = [v for v in colored if v.x == x0]
        done = lambda v: v.x == x1  # noqa: E731
    else:
        frontier = [v for v in colored if v.y == y0]
        done = lambda v: v.y == y1  # noqa: E731
    reached = set(frontier)
    while frontier:
        v = frontier.pop()
        if done(v):
            return True
        for w in neighbors(v):
            if w in colored and w not in reached:
                reached.add(w)
                frontier.append(w)
    return False


def test_crossing_matches_search_exhaustive():
    window = Window.parallelogram(0, 3, 0, 2)
    config = SiteConfig.empty(window)
    for bits in itertools.product((VACANT, OCCUPIED), repeat=config.n_sites):
        config.state[config.mask] = bits
        for orientation in Orientation:
            for color in Color:
                assert detect_crossing(config, window, orientation, color) == _bfs_crossing(
                    config, window, orientation, color
                ), (bits, orientation, color)


def test_exact_crossing_probability_of_small_parallelogram():
    window = Window.parallelogram(0, 2, 0, 1)
    config = SiteConfig.empty(window)
    assert config.n_sites == 6
    hits = 0
    for bits in itertools.product((VACANT, OCCUPIED), repeat=6):
        config.state[config.mask] = bits
        hits += detect_crossing(config, window, Orientation.HORIZONTAL, Color.OCCUPIED)
    assert Fraction(hits, 2 ** 6) == Fraction(21, 64)


def _winding_circuit(config, annulus, color):
    """
    A ``color`` cycle inside the annulus winds around its centre iff lifting
    the polar angle along the cluster edges is inconsistent somewhere.
    """
    geometry = annulus_geometry(annulus, config.grid)
    grid = config.grid
    colored = config.color_mask(color) & geometry.mask
    cx, cy = annulus.center

    def angle(v):
        ex, ey = embed(v)
        return math.atan2(ey - cy, ex - cx)

    lift = {}
    for start in grid.sites(colored):
        if start in lift:
            continue
        lift[start] = angle(start)
        stack = [start]
        while stack:
            v = stack.pop()
            for w in neighbors(v):
                if not grid.contains_site(w) or not colored[grid.index(w)]:
                    continue
                value = lift[v] + (angle(w) - angle(v) + math.pi) % (2 * math.pi) - math.pi
                if w not in lift:
                    lift[w] = value
                    stack.append(w)
                elif abs(lift[w] - value) > math.pi:
                    return True
    return False


def test_winding_search_on_known_configurations():
    annulus = Window.annulus(1, 3)
    full = SiteConfig.filled(Window.ball(3))
    assert _winding_circuit(full, annulus, Color.OCCUPIED)
    assert not _winding_circuit(full, annulus, Color.VACANT)
    cut = full.copy()
    for x in range(0, 4):
        cut.set_value((x, 0), VACANT)
    assert not _winding_circuit(cut, annulus, Color.OCCUPIED)


@pytest.mark.parametrize("seed", range(60))
def test_circuit_matches_winding_search(seed):
    annulus = Window.annulus(1, 3)
    config = sample(Window.ball(3), 0.5, seed)
    for color in Color:
        assert detect_circuit(config, annulus, color) == _winding_circuit(config, annulus, color)


@pytest.mark.slow
def test_circuit_matches_winding_search_exhaustive():
    annulus = Window.annulus(1, 2)
    config = SiteConfig.filled(Window.ball(2))
    ring = annulus.mask_on(config.grid) & config.mask
    assert int(ring.sum()) == 16
    for bits in itertools.product((VACANT, OCCUPIED), repeat=16):
        config.state[ring] = bits
        for color in Color:
            assert detect_circuit(config, annulus, color) == _winding_circuit(config, annulus, color), bits


def test_largest_cluster_of_filled_window():
    config = SiteConfig.filled(Window.ball(5))
    _, volume = largest_cluster(config)
    assert volume == config.n_sites
    assert largest_cluster(SiteConfig.empty(Window.ball(5))) == (0, 0)


def test_cluster_labels_are_consistent():
    config = sample(Window.ball(12), 0.55, 3)
    labeling = label_clusters(config)
    assert labeling.sizes[1:].sum() == config.occupied().sum()
    occupied = config.sites(Color.OCCUPIED)
    v = occupied[0]
    mask = cluster_of(config, v)
    assert mask.sum() == labeling.size_of(labeling.label_of(v))


def test_net_on_extreme_configurations():
    window = net_window(12, 4)
    assert detect_net(sample(window, 1.0, 0), 12, 4)
    assert not detect_net(sample(window, 0.0, 0), 12, 4)


def test_net_ignores_core_ball():
    window = net_window(12, 4)
    config = sample(window, 1.0, 0)
    config.state[Window.ball(4).mask_on(config.grid) & config.mask] = VACANT
    assert detect_net(config, 12, 4)


# =============================================================================
# ESTIMATORS
# =============================================================================

def test_L_is_undecided_at_criticality():
    with pytest.raises(UndecidedError):
        estimate_L(0.5)
    with pytest.raises(ValueError):
        estimate_L(1.5)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_L_of_degenerate_parameters(p):
    assert estimate_L(p, mc_budget=8000, seed=1) == 1


def test_theta_at_full_occupation():
    result = estimate_theta(1.0, 4, 20, seed=0)
    assert result.p_hat == 1.0
    with pytest.raises(ValueError):
        estimate_theta(0.4, 4, 20, seed=0)
