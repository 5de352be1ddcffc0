"""
Bernoulli site percolation: configurations, cluster labeling, crossings,
circuits and nets.

States are stored as int8 arrays over the bounding grid of the window:
1 occupied, 0 vacant, -1 burnt. Burnt sites count as vacant for every
connectivity question.
"""
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from nearcrit.errors import WindowError
from nearcrit.lattice import (
    BoundarySide,
    Grid,
    SiteCoord,
    TRIANGULAR_STRUCTURE,
    Window,
    WindowKind,
    annulus_geometry,
    cached_side_mask,
    require_inside,
    window_mask,
)
from nearcrit.services.seeding import SeedLike, as_rng

logger = logging.getLogger(__name__)

OCCUPIED = 1
VACANT = 0
BURNT = -1


# =============================================================================
# ENUMS
# =============================================================================

class Color(str, enum.Enum):
    """Percolation colour."""
    OCCUPIED = "o"
    VACANT = "v"

    @classmethod
    def parse(cls, value) -> "Color":
        if isinstance(value, Color):
            return value
        text = str(value).strip().lower()
        if text in ("o", "occupied", "open"):
            return cls.OCCUPIED
        if text in ("v", "vacant", "closed"):
            return cls.VACANT
        raise ValueError(f"Unknown colour: {value}")

    @property
    def other(self) -> "Color":
        return Color.VACANT if self == Color.OCCUPIED else Color.OCCUPIED


class Orientation(str, enum.Enum):
    """Crossing direction: horizontal joins left to right, vertical bottom to top."""
    HORIZONTAL = "h"
    VERTICAL = "v"

    @classmethod
    def parse(cls, value) -> "Orientation":
        if isinstance(value, Orientation):
            return value
        text = str(value).strip().lower()
        if text in ("h", "horizontal"):
            return cls.HORIZONTAL
        if text in ("v", "vertical"):
            return cls.VERTICAL
        raise ValueError(f"Unknown orientation: {value}")

    def sides(self) -> Tuple[BoundarySide, BoundarySide]:
        if self == Orientation.HORIZONTAL:
            return (BoundarySide.LEFT, BoundarySide.RIGHT)
        return (BoundarySide.BOTTOM, BoundarySide.TOP)


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass
class SiteConfig:
    """
    Finite configuration over ``window``.

    ``mask`` marks the sites of the window on ``grid``; cells outside it are
    kept at 0 and ignored. ``birth_time`` and ``burn_time`` are optional float
    arrays over the same grid (NaN where undefined).
    """
    window: Window
    grid: Grid
    mask: np.ndarray
    state: np.ndarray
    birth_time: Optional[np.ndarray] = None
    burn_time: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, window: Window) -> "SiteConfig":
        grid, mask = window_mask(window)
        return cls(window=window, grid=grid, mask=mask, state=np.zeros(grid.shape, dtype=np.int8))

    @classmethod
    def filled(cls, window: Window, value: int = OCCUPIED) -> "SiteConfig":
        config = cls.empty(window)
        config.state[config.mask] = value
        return config

    @classmethod
    def from_occupied(cls, window: Window, occupied: np.ndarray) -> "SiteConfig":
        config = cls.empty(window)
        config.state[np.asarray(occupied, dtype=bool) & config.mask] = OCCUPIED
        return config

    def copy(self) -> "SiteConfig":
        return replace(
            self,
            state=self.state.copy(),
            birth_time=None if self.birth_time is None else self.birth_time.copy(),
            burn_time=None if self.burn_time is None else self.burn_time.copy(),
        )

    @property
    def n_sites(self) -> int:
        return int(self.mask.sum())

    def color_mask(self, color) -> np.ndarray:
        if Color.parse(color) == Color.OCCUPIED:
            return (self.state == OCCUPIED) & self.mask
        return (self.state <= VACANT) & self.mask

    def occupied(self) -> np.ndarray:
        return self.color_mask(Color.OCCUPIED)

    def occupied_fraction(self) -> float:
        n = self.n_sites
        return float(self.occupied().sum()) / n if n else 0.0

    def value(self, v) -> int:
        iy, ix = self.grid.index(v)
        if not self.mask[iy, ix]:
            raise WindowError(f"Site {tuple(v)} is not in the configuration window")
        return int(self.state[iy, ix])

    def set_value(self, v, value: int) -> None:
        iy, ix = self.grid.index(v)
        if not self.mask[iy, ix]:
            raise WindowError(f"Site {tuple(v)} is not in the configuration window")
        self.state[iy, ix] = value

    def sites(self, color=Color.OCCUPIED) -> List[SiteCoord]:
        return self.grid.sites(self.color_mask(color))

    def flipped(self) -> "SiteConfig":
        """Exchange occupied and vacant sites; burnt sites stay burnt."""
        out = self.copy()
        out.state[self.mask & (self.state == OCCUPIED)] = VACANT
        out.state[self.mask & (self.state == VACANT)] = OCCUPIED
        return out

    def iter_states(self) -> Iterator[Tuple[SiteCoord, int]]:
        for flat in np.flatnonzero(self.mask):
            iy, ix = divmod(int(flat), self.grid.width)
            yield self.grid.site(flat), int(self.state[iy, ix])


def sample(window: Window, p: float, seed: SeedLike) -> SiteConfig:
    """
    I.i.d. Bernoulli(p) configuration on ``window``.

    Site (x, y) is occupied iff U < p, with one uniform per grid cell drawn in
    row-major order.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = as_rng(seed)
    config = SiteConfig.empty(window)
    uniforms = rng.random(config.grid.shape)
    config.state[(uniforms < p) & config.mask] = OCCUPIED
    return config


# =============================================================================
# CLUSTERS
# =============================================================================

@dataclass(frozen=True)
class ClusterLabeling:
    """
    Clusters of one colour.

    ``label`` is 0 off the colour, otherwise a cluster id in 1..count assigned
    in row-major order of first appearance. ``sizes[i]`` is the size of cluster
    i (``sizes[0]`` is 0).
    """
    grid: Grid
    color: Color
    label: np.ndarray
    sizes: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return int(self.sizes.size - 1)

    def label_of(self, v) -> int:
        iy, ix = self.grid.index(v)
        return int(self.label[iy, ix])

    def size_of(self, cluster: int) -> int:
        return int(self.sizes[cluster])

    def cluster_mask(self, cluster: int) -> np.ndarray:
        return self.label == cluster

    def cluster_sites(self, cluster: int) -> List[SiteCoord]:
        return self.grid.sites(self.label == cluster)


def label_mask(colored: np.ndarray) -> Tuple[np.ndarray, int]:
    """Triangular-lattice connected components of a boolean array."""
    return ndimage.label(colored, structure=TRIANGULAR_STRUCTURE)


def label_clusters(config: SiteConfig, color=Color.OCCUPIED, within: Optional[Window] = None) -> ClusterLabeling:
    """
    Clusters of ``color`` in the configuration, or restricted to ``within``.
    """
    color = Color.parse(color)
    colored = config.color_mask(color)
    if within is not None:
        colored = colored & within.mask_on(config.grid)
    label, count = label_mask(colored)
    sizes = np.bincount(label.ravel(), minlength=count + 1)
    sizes[0] = 0
    return ClusterLabeling(grid=config.grid, color=color, label=label, sizes=sizes)


def largest_cluster(config: SiteConfig, window: Optional[Window] = None) -> Tuple[int, int]:
    """
    Largest occupied cluster inside ``window`` (default: the whole configuration).

    Returns:
        (cluster id, volume); (0, 0) when there is no occupied site. Ties go
        to the smallest id.
    """
    if window is not None:
        require_inside(window, config.grid, config.mask)
    labeling = label_clusters(config, Color.OCCUPIED, within=window)
    if labeling.count == 0:
        return (0, 0)
    best = int(np.argmax(labeling.sizes))
    return (best, int(labeling.sizes[best]))


def cluster_of(config: SiteConfig, v, color=Color.OCCUPIED) -> np.ndarray:
    """Mask of the ``color`` cluster containing ``v`` (empty if ``v`` has another colour)."""
    colored = config.color_mask(color)
    iy, ix = config.grid.index(v)
    if not colored[iy, ix]:
        return np.zeros(config.grid.shape, dtype=bool)
    label, _ = label_mask(colored)
    return label == label[iy, ix]


def connected_sets(colored: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    """Whether some component of ``colored`` meets both ``a`` and ``b``."""
    label, count = label_mask(colored)
    if count == 0:
        return False
    la = np.unique(label[a & colored])
    lb = np.unique(label[b & colored])
    return np.intersect1d(la[la > 0], lb[lb > 0]).size > 0


# =============================================================================
# CROSSINGS AND CIRCUITS
# =============================================================================

def detect_crossing(
    config: SiteConfig,
    rect: Window,
    orientation=Orientation.HORIZONTAL,
    color=Color.OCCUPIED,
    exclude: Optional[Window] = None,
) -> bool:
    """
    Whether a ``color`` path inside ``rect`` joins its two opposite sides.

    Args:
        config: Configuration containing ``rect``
        rect: Rectangle or parallelogram window (a ball is read as its square)
        orientation: Horizontal (left to right) or vertical (bottom to top)
        color: Colour of the path
        exclude: Sites of this window are not available to the path

    Raises:
        WindowError: if ``rect`` is not contained in the configuration
    """
    if rect.kind == WindowKind.ANNULUS:
        raise WindowError("Crossings are defined on rectangles, parallelograms and balls")
    slices, sub, inside = require_inside(rect, config.grid, config.mask)
    colored = config.color_mask(color)[slices] & inside
    if exclude is not None:
        colored &= ~exclude.mask_on(sub)
    first, second = Orientation.parse(orientation).sides()
    return connected_sets(colored, cached_side_mask(rect, first), cached_side_mask(rect, second))


def radial_crossing(config: SiteConfig, annulus: Window, color=Color.OCCUPIED) -> bool:
    """Whether a ``color`` path inside ``annulus`` joins its inner and outer contact sets."""
    geometry = _annulus_on(config, annulus)
    colored = config.color_mask(color) & geometry.mask
    return connected_sets(colored, geometry.inner_contact, geometry.outer_contact)


def detect_circuit(config: SiteConfig, annulus: Window, color=Color.OCCUPIED) -> bool:
    """
    Whether a ``color`` circuit inside ``annulus`` surrounds its inner ball.

    The triangular lattice is self-matching: such a circuit exists iff no path
    of the other colour crosses the annulus radially.
    """
    return not radial_crossing(config, annulus, Color.parse(color).other)


def _annulus_on(config: SiteConfig, annulus: Window):
    geometry = annulus_geometry(annulus, config.grid)
    if np.any(geometry.mask & ~config.mask):
        raise WindowError("Annulus is not contained in the configuration window")
    return geometry


# =============================================================================
# NETS
# =============================================================================

def net_rectangles(n: float, kappa: float) -> List[Tuple[Window, Orientation]]:
    """
    Rectangles of the mesh-``kappa`` net meeting the square [-n, n]².

    Horizontal members are (κ/2)([-4,4]×[-1,1] + (6i, 6j-3)), vertical ones
    (κ/2)([-1,1]×[-4,4] + (6i-3, 6j)); each must be crossed in its long
    direction.
    """
    if kappa < 1 or n < kappa:
        raise ValueError(f"Net needs 1 <= kappa <= n, got n={n}, kappa={kappa}")
    k = float(kappa)
    reach = int(math.ceil((n + 2 * k) / (3 * k))) + 1
    out: List[Tuple[Window, Orientation]] = []
    for i in range(-reach, reach + 1):
        for j in range(-reach, reach + 1):
            horizontal = Window.rectangle(3 * k * i - 2 * k, 3 * k * i + 2 * k, 3 * k * j - 2 * k, 3 * k * j - k)
            vertical = Window.rectangle(3 * k * i - 2 * k, 3 * k * i - k, 3 * k * j - 2 * k, 3 * k * j + 2 * k)
            for rect, orientation in ((horizontal, Orientation.HORIZONTAL), (vertical, Orientation.VERTICAL)):
                x1, x2, y1, y2 = rect.extents
                if x1 <= n and x2 >= -n and y1 <= n and y2 >= -n:
                    out.append((rect, orientation))
    return out


def detect_net(config: SiteConfig, n: float, kappa: float) -> bool:
    """
    Whether every net rectangle meeting [-n, n]² has an occupied crossing in its
    long direction. Sites of ball(κ) are never used, so the outcome does not
    depend on them.

    Raises:
        WindowError: if some net rectangle is not contained in the configuration
    """
    core = Window.ball(kappa)
    rectangles = net_rectangles(n, kappa)
    for rect, _ in rectangles:
        require_inside(rect, config.grid, config.mask)
    for rect, orientation in rectangles:
        if not detect_crossing(config, rect, orientation, Color.OCCUPIED, exclude=core):
            return False
    return True


def net_window(n: float, kappa: float) -> Window:
    """Smallest ball around the origin that contains every net rectangle for (n, κ)."""
    reach = 0.0
    for rect, _ in net_rectangles(n, kappa):
        reach = max(reach, *(abs(v) for v in rect.extents))
    return Window.ball(math.ceil(reach) + 1)
