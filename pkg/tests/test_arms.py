import itertools

import pytest

from nearcrit.arms import ArmSpec, detect_arm_event, is_cyclic_subsequence
from nearcrit.errors import WindowError
from nearcrit.estimators import estimate_arm
from nearcrit.lattice import Window, annulus_geometry, neighbors
from nearcrit.percolation import OCCUPIED, VACANT, SiteConfig, sample

ANNULUS = Window.annulus(1, 6)


def _config(rule):
    config = SiteConfig.empty(Window.ball(6))
    ex, ey = config.grid.embedded()
    config.state[config.mask & rule(ex, ey)] = OCCUPIED
    return config


@pytest.fixture
def quadrants():
    return _config(lambda ex, ey: ex * ey > 0)


@pytest.fixture
def half_plane():
    return _config(lambda ex, ey: ex > 0)


def test_parse_words():
    assert ArmSpec.parse("A4").word == "ovov"
    assert ArmSpec.parse("4").word == "ovov"
    assert ArmSpec.parse("o v").word == "ov"
    assert ArmSpec.parse("oo").is_monochromatic
    assert ArmSpec.parse("oov").has_adjacent_repeat
    assert not ArmSpec.parse("ovov").has_adjacent_repeat


@pytest.mark.parametrize("text", ["", "ox", "A0"])
def test_parse_rejects(text):
    with pytest.raises(ValueError):
        ArmSpec.parse(text)


def test_cyclic_subsequence():
    assert is_cyclic_subsequence("ov", "vo")
    assert is_cyclic_subsequence("ovov", "voovov")
    assert not is_cyclic_subsequence("oo", "ov")
    assert not is_cyclic_subsequence("ovov", "ov")


def test_filled_annulus():
    full = SiteConfig.filled(Window.ball(6))
    assert detect_arm_event(full, ANNULUS, ArmSpec.parse("o"))
    assert detect_arm_event(full, ANNULUS, ArmSpec.parse("oo"))
    assert not detect_arm_event(full, ANNULUS, ArmSpec.parse("v"))
    assert not detect_arm_event(full, ANNULUS, ArmSpec.parse("ov"))


def test_half_plane_arms(half_plane):
    assert detect_arm_event(half_plane, ANNULUS, ArmSpec.parse("ov"))
    assert detect_arm_event(half_plane, ANNULUS, ArmSpec.parse("oov"))
    assert not detect_arm_event(half_plane, ANNULUS, ArmSpec.parse("ovov"))


def test_quadrant_arms(quadrants):
    assert detect_arm_event(quadrants, ANNULUS, ArmSpec.parse("ovov"))
    assert detect_arm_event(quadrants, ANNULUS, ArmSpec.parse("ov"))


def test_annulus_must_fit():
    config = SiteConfig.filled(Window.ball(3))
    with pytest.raises(WindowError):
        detect_arm_event(config, ANNULUS, ArmSpec.parse("o"))


@pytest.mark.slow
def test_one_arm_probability_decreases():
    spec = ArmSpec.parse("o")
    near = estimate_arm(spec, 1, 4, 0.5, 2000, seed=11)
    far = estimate_arm(spec, 1, 16, 0.5, 2000, seed=12)
    assert far.p_hat < near.p_hat


# =============================================================================
# BRUTE-FORCE ARMS
# =============================================================================

WORDS = ["o", "ov", "oo", "oov", "ovov", "oovv"]


def _simple_arms(config, geometry, color):
    """
    Every self-avoiding ``color`` path that meets the inner contact only at
    its first site and the outer contact only at its last.
    """
    grid = config.grid
    colored = config.color_mask(color) & geometry.mask
    inner, outer = geometry.inner_contact, geometry.outer_contact
    arms = []

    def extend(path, seen):
        for w in neighbors(path[-1]):
            if w in seen or not grid.contains_site(w):
                continue
            idx = grid.index(w)
            if not colored[idx] or inner[idx]:
                continue
            if outer[idx]:
                arms.append(path + [w])
                continue
            seen.add(w)
            path.append(w)
            extend(path, seen)
            path.pop()
            seen.remove(w)

    for start in grid.sites(colored & inner):
        if outer[grid.index(start)]:
            arms.append([start])
        else:
            extend([start], {start})
    return arms


def _brute_arm_event(config, annulus, spec):
    """Disjoint arms whose colours, read by the angle of their first site, form a rotation of the word."""
    geometry = annulus_geometry(annulus, config.grid)
    arms = []
    for color in set(spec.sigma):
        for path in _simple_arms(config, geometry, color):
            arms.append((float(geometry.angle[config.grid.index(path[0])]), frozenset(path), color))
    arms.sort(key=lambda arm: arm[0])
    sigma = tuple(spec.sigma)
    rotations = {sigma[i:] + sigma[:i] for i in range(len(sigma))}
    prefixes = {r[:j] for r in rotations for j in range(len(r) + 1)}

    def search(first, used, word):
        if len(word) == len(sigma):
            return word in rotations
        for j in range(first, len(arms)):
            _, sites, color = arms[j]
            if (word + (color,)) in prefixes and not (sites & used):
                if search(j + 1, used | sites, word + (color,)):
                    return True
        return False

    return search(0, frozenset(), ())


def test_path_enumeration_on_half_plane():
    config = SiteConfig.empty(Window.ball(3))
    ex, _ = config.grid.embedded()
    config.state[config.mask & (ex > 0)] = OCCUPIED
    annulus = Window.annulus(1, 3)
    assert _brute_arm_event(config, annulus, ArmSpec.parse("ov"))
    assert not _brute_arm_event(config, annulus, ArmSpec.parse("ovov"))


@pytest.mark.parametrize("word", WORDS)
@pytest.mark.parametrize("seed", range(40))
def test_arm_event_matches_path_enumeration(word, seed):
    annulus = Window.annulus(1, 3)
    config = sample(Window.ball(3), 0.5, seed)
    spec = ArmSpec.parse(word)
    assert detect_arm_event(config, annulus, spec) == _brute_arm_event(config, annulus, spec)


@pytest.mark.slow
@pytest.mark.parametrize("word", ["ov", "ovov", "oov"])
def test_arm_event_exhaustive_on_thin_annulus(word):
    annulus = Window.annulus(1, 2)
    config = SiteConfig.filled(Window.ball(2))
    ring = annulus.mask_on(config.grid) & config.mask
    assert int(ring.sum()) == 16
    spec = ArmSpec.parse(word)
    for bits in itertools.product((VACANT, OCCUPIED), repeat=16):
        config.state[ring] = bits
        assert detect_arm_event(config, annulus, spec) == _brute_arm_event(config, annulus, spec), bits
