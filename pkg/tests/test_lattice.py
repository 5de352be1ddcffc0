import math

import numpy as np
import pytest

from nearcrit.errors import WindowError
from nearcrit.lattice import (
    BoundarySide,
    Window,
    boundary,
    count_ball_sites,
    count_sites,
    embed,
    neighbors,
    sites_in,
)


def test_embedding_of_unit_vectors():
    assert embed((1, 0)) == (1.0, 0.0)
    x, y = embed((0, 1))
    assert x == pytest.approx(0.5)
    assert y == pytest.approx(math.sqrt(3) / 2)


def test_six_distinct_neighbors():
    nbrs = neighbors((2, -3))
    assert len(set(nbrs)) == 6
    assert (2, -3) not in nbrs


@pytest.mark.parametrize("radius, expected", [(0, 1), (1, 7), (2, 23), (3, 45)])
def test_ball_site_counts(radius, expected):
    assert count_sites(Window.ball(radius)) == expected
    assert count_ball_sites(radius) == expected


@pytest.mark.parametrize("radius", [0.5, 2.3, 7.0, 10.5, 31.0])
def test_row_count_matches_enumeration(radius):
    assert count_ball_sites(radius) == count_sites(Window.ball(radius))


def test_annulus_excludes_inner_ball():
    assert count_sites(Window.annulus(1, 3)) == 45 - 7


def test_box_is_ball_of_half_side():
    assert Window.box(10) == Window.ball(5)


def test_parallelogram_sites():
    window = Window.parallelogram(0, 3, 0, 2)
    sites = sites_in(window)
    assert len(sites) == 12
    assert min(s.x for s in sites) == 0 and max(s.y for s in sites) == 2


def test_inner_boundary_of_unit_ball():
    inner = boundary(Window.ball(1), BoundarySide.INNER)
    assert len(inner) == 6
    assert (0, 0) not in inner


def test_outer_boundary_lies_outside():
    window = Window.ball(2)
    outer = boundary(window, BoundarySide.OUTER)
    assert outer
    assert not any(window.contains(v) for v in outer)


def test_rectangle_sides_are_disjoint():
    rect = Window.rectangle(0, 8, 0, 4)
    left = set(boundary(rect, BoundarySide.LEFT))
    right = set(boundary(rect, BoundarySide.RIGHT))
    assert left and right
    assert not left & right


@pytest.mark.parametrize(
    "build",
    [
        lambda: Window.annulus(3, 2),
        lambda: Window.ball(-1),
        lambda: Window.rectangle(2, 1, 0, 1),
        lambda: Window.ball(math.inf),
    ],
)
def test_malformed_windows(build):
    with pytest.raises(WindowError):
        build()


def test_window_dict_round_trip():
    window = Window.annulus(2, 5, center=(1.0, 0.5))
    assert Window.from_dict(window.to_dict()) == window


def test_mask_cells_outside_window_are_false():
    window = Window.ball(4)
    grid = window.bounding_grid()
    mask = window.mask_on(grid)
    assert mask.shape == grid.shape
    assert 0 < mask.sum() < mask.size
