import numpy as np
import pytest

from nearcrit.frozen import simulate_frozen
from nearcrit.lattice import Window, count_sites
from nearcrit.percolation import OCCUPIED, label_mask


@pytest.fixture
def box():
    return Window.box(16)


def test_infinite_threshold_fills_the_window(box):
    result = simulate_frozen(box, None, seed=0)
    config = result.config
    assert np.all(config.state[config.mask] == OCCUPIED)
    assert result.blocked == 0
    assert result.size_cap is None
    assert result.max_cluster_size() == count_sites(box)


def test_threshold_one_gives_isolated_sites(box):
    result = simulate_frozen(box, 1, seed=3)
    label, count = label_mask(result.config.state == OCCUPIED)
    assert count == int(result.config.occupied().sum())
    assert all(m.parts == () and m.size == 1 and m.froze for m in result.merges)
    assert result.blocked == count_sites(box) - count


@pytest.mark.parametrize("threshold", [2, 5, 12])
def test_cluster_sizes_respect_the_cap(box, threshold):
    result = simulate_frozen(box, threshold, seed=7)
    assert result.max_cluster_size() <= result.size_cap
    assert all(size >= threshold for size in result.frozen_sizes())
    for merge in result.merges:
        assert all(part < threshold for part in merge.parts)
        assert merge.size == sum(merge.parts) + 1
        assert merge.froze == (merge.size >= threshold)


def test_merge_times_increase(box):
    times = [m.time for m in simulate_frozen(box, 5, seed=2).merges]
    assert times == sorted(times)
    assert 0.0 <= times[0] and times[-1] <= 1.0


def test_runs_are_deterministic(box):
    first = simulate_frozen(box, 6, seed=9)
    second = simulate_frozen(box, 6, seed=9)
    assert first.merge_rows() == second.merge_rows()
    assert np.array_equal(first.config.state, second.config.state)


def test_threshold_below_one_is_rejected(box):
    with pytest.raises(ValueError):
        simulate_frozen(box, 0, seed=0)
