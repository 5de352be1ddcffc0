"""
Triangular lattice geometry.

Sites are addressed by axial coordinates (x, y), standing for the point
x + y·e^{iπ/3} of the plane. Windows are regions of the plane (L∞ balls,
annuli, rectangles) or axial boxes ("parallelograms"); a site belongs to a
window iff its embedding lies in the closed region.

Arrays over a window are laid out on a ``Grid``: an axial bounding box indexed
``[y - y0, x - x0]``.
"""
import enum
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from nearcrit.config import MAX_WINDOW_EXTENT
from nearcrit.errors import WindowError

logger = logging.getLogger(__name__)

SQRT3_2 = math.sqrt(3.0) / 2.0

# Closed-region membership tolerance for floating point embeddings.
EPS = 1e-9

OFFSETS: Tuple[Tuple[int, int], ...] = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
FORWARD_OFFSETS: Tuple[Tuple[int, int], ...] = ((1, 0), (0, 1), (-1, 1))

# scipy.ndimage structuring element for arrays indexed [dy, dx]
TRIANGULAR_STRUCTURE = np.array(
    [[0, 1, 1],
     [1, 1, 1],
     [1, 1, 0]],
    dtype=bool,
)


# =============================================================================
# SITES
# =============================================================================

class SiteCoord(NamedTuple):
    """Axial lattice coordinates."""
    x: int
    y: int


def embed(v: Sequence[int]) -> Tuple[float, float]:
    """Planar position of a site: (x + y/2, y·√3/2)."""
    return (v[0] + v[1] / 2.0, v[1] * SQRT3_2)


def embed_arrays(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return x + y / 2.0, y * SQRT3_2


def neighbors(v: Sequence[int]) -> List[SiteCoord]:
    """The six lattice neighbours of ``v``."""
    return [SiteCoord(v[0] + dx, v[1] + dy) for dx, dy in OFFSETS]


def linf(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(dx), np.abs(dy))


# =============================================================================
# ENUMS
# =============================================================================

class WindowKind(str, enum.Enum):
    """Shape of a window."""
    RECTANGLE = "rectangle"
    BALL = "ball"
    ANNULUS = "annulus"
    PARALLELOGRAM = "parallelogram"


class BoundarySide(str, enum.Enum):
    """Named parts of a window boundary."""
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"
    INNER = "inner"
    OUTER = "outer"


# =============================================================================
# GRID
# =============================================================================

@dataclass(frozen=True)
class Grid:
    """Axial bounding box; arrays over it have shape (height, width)."""
    x0: int
    y0: int
    width: int
    height: int

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.height * self.width

    def axial(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = np.arange(self.x0, self.x0 + self.width, dtype=np.int64)
        ys = np.arange(self.y0, self.y0 + self.height, dtype=np.int64)
        return np.meshgrid(xs, ys)

    def embedded(self) -> Tuple[np.ndarray, np.ndarray]:
        x, y = self.axial()
        return embed_arrays(x, y)

    def contains_site(self, v: Sequence[int]) -> bool:
        return self.x0 <= v[0] < self.x0 + self.width and self.y0 <= v[1] < self.y0 + self.height

    def index(self, v: Sequence[int]) -> Tuple[int, int]:
        if not self.contains_site(v):
            raise WindowError(f"Site {tuple(v)} outside grid {self}")
        return (v[1] - self.y0, v[0] - self.x0)

    def flat_index(self, v: Sequence[int]) -> int:
        iy, ix = self.index(v)
        return iy * self.width + ix

    def site(self, flat: int) -> SiteCoord:
        iy, ix = divmod(int(flat), self.width)
        return SiteCoord(self.x0 + ix, self.y0 + iy)

    def expand(self, k: int) -> "Grid":
        return Grid(self.x0 - k, self.y0 - k, self.width + 2 * k, self.height + 2 * k)

    def slices_for(self, other: "Grid") -> Tuple[slice, slice]:
        """Slices of arrays over ``self`` that cover ``other``."""
        ix = other.x0 - self.x0
        iy = other.y0 - self.y0
        if ix < 0 or iy < 0 or ix + other.width > self.width or iy + other.height > self.height:
            raise WindowError(f"Grid {other} is not contained in {self}")
        return (slice(iy, iy + other.height), slice(ix, ix + other.width))

    def sites(self, mask: np.ndarray) -> List[SiteCoord]:
        """Sites where ``mask`` is set, in row-major order (y, then x)."""
        return [self.site(i) for i in np.flatnonzero(mask)]

    def coords(self, mask: np.ndarray) -> np.ndarray:
        """(N, 2) integer array of the sites where ``mask`` is set."""
        flat = np.flatnonzero(mask)
        iy, ix = np.divmod(flat, self.width)
        return np.column_stack((ix + self.x0, iy + self.y0)).astype(np.int64)


def shift(arr: np.ndarray, dx: int, dy: int, fill) -> np.ndarray:
    """``out[iy, ix] = arr[iy + dy, ix + dx]``, ``fill`` where that falls off the grid."""
    h, w = arr.shape
    out = np.full_like(arr, fill)
    dst = (slice(max(0, -dy), min(h, h - dy)), slice(max(0, -dx), min(w, w - dx)))
    src = (slice(max(0, dy), min(h, h + dy)), slice(max(0, dx), min(w, w + dx)))
    out[dst] = arr[src]
    return out


def any_neighbor(mask: np.ndarray, fill: bool = False) -> np.ndarray:
    """Sites having at least one neighbour where ``mask`` holds."""
    out = np.zeros(mask.shape, dtype=bool)
    for dx, dy in OFFSETS:
        out |= shift(mask, dx, dy, fill)
    return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# =============================================================================
# WINDOWS
# =============================================================================

_EXTENT_COUNT = {
    WindowKind.BALL: 1,
    WindowKind.ANNULUS: 2,
    WindowKind.RECTANGLE: 4,
    WindowKind.PARALLELOGRAM: 4,
}


@dataclass(frozen=True)
class Window:
    """
    Closed planar region, or axial box.

    extents by kind:
        ball: (n,)              L∞ ball of radius n around ``center``
        annulus: (n1, n2)       ball(n2) minus ball(n1), same centre
        rectangle: (x1, x2, y1, y2) in embedded coordinates
        parallelogram: (x0, x1, y0, y1) inclusive axial bounds
    """
    kind: WindowKind
    center: Tuple[float, float] = (0.0, 0.0)
    extents: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.extents) != _EXTENT_COUNT[self.kind]:
            raise WindowError(f"{self.kind.value} window needs {_EXTENT_COUNT[self.kind]} extents")
        values = tuple(self.extents) + tuple(self.center)
        if not all(math.isfinite(v) for v in values):
            raise WindowError("Window extents must be finite")
        if max(abs(v) for v in values) + self._span() > MAX_WINDOW_EXTENT:
            raise WindowError(f"Window exceeds the supported extent {MAX_WINDOW_EXTENT}")
        if self.kind == WindowKind.BALL and self.extents[0] < 0:
            raise WindowError("Ball radius must be non-negative")
        if self.kind == WindowKind.ANNULUS:
            n1, n2 = self.extents
            if n1 < 0 or n2 < n1:
                raise WindowError(f"Malformed annulus radii ({n1}, {n2})")
        if self.kind in (WindowKind.RECTANGLE, WindowKind.PARALLELOGRAM):
            a, b, c, d = self.extents
            if b < a or d < c:
                raise WindowError(f"Malformed {self.kind.value} extents {self.extents}")
        if self.kind == WindowKind.PARALLELOGRAM and not all(float(v).is_integer() for v in self.extents):
            raise WindowError("Parallelogram bounds must be integers")

    def _span(self) -> float:
        if self.kind in (WindowKind.BALL, WindowKind.ANNULUS):
            return float(self.extents[-1])
        return 0.0

    # -------------------------------------------------------------------------
    # constructors
    # -------------------------------------------------------------------------

    @classmethod
    def ball(cls, n: float, center: Tuple[float, float] = (0.0, 0.0)) -> "Window":
        return cls(WindowKind.BALL, (float(center[0]), float(center[1])), (float(n),))

    @classmethod
    def annulus(cls, n1: float, n2: float, center: Tuple[float, float] = (0.0, 0.0)) -> "Window":
        return cls(WindowKind.ANNULUS, (float(center[0]), float(center[1])), (float(n1), float(n2)))

    @classmethod
    def rectangle(cls, x1: float, x2: float, y1: float, y2: float) -> "Window":
        center = ((x1 + x2) / 2.0, (y1 + y2) / 2.0)
        return cls(WindowKind.RECTANGLE, center, (float(x1), float(x2), float(y1), float(y2)))

    @classmethod
    def parallelogram(cls, x0: int, x1: int, y0: int, y1: int) -> "Window":
        center = embed(((x0 + x1) / 2.0, (y0 + y1) / 2.0))
        return cls(WindowKind.PARALLELOGRAM, center, (float(x0), float(x1), float(y0), float(y1)))

    @classmethod
    def box(cls, side: float) -> "Window":
        """Box of side ``side`` around the origin, i.e. ball(side / 2)."""
        return cls.ball(side / 2.0)

    # -------------------------------------------------------------------------
    # geometry
    # -------------------------------------------------------------------------

    @property
    def radius(self) -> float:
        """Outer radius of a ball or annulus."""
        if self.kind not in (WindowKind.BALL, WindowKind.ANNULUS):
            raise WindowError(f"{self.kind.value} window has no radius")
        return float(self.extents[-1])

    @property
    def inner_radius(self) -> float:
        if self.kind != WindowKind.ANNULUS:
            raise WindowError("Only annuli have an inner radius")
        return float(self.extents[0])

    def outer_ball(self) -> "Window":
        return Window.ball(self.radius, self.center)

    def inner_ball(self) -> "Window":
        return Window.ball(self.inner_radius, self.center)

    def square(self) -> Tuple[float, float, float, float]:
        """Planar bounding rectangle (x1, x2, y1, y2)."""
        if self.kind == WindowKind.RECTANGLE:
            return tuple(self.extents)
        if self.kind == WindowKind.PARALLELOGRAM:
            x0, x1, y0, y1 = self.extents
            xs = [embed((a, b))[0] for a in (x0, x1) for b in (y0, y1)]
            return (min(xs), max(xs), y0 * SQRT3_2, y1 * SQRT3_2)
        cx, cy = self.center
        r = self.radius
        return (cx - r, cx + r, cy - r, cy + r)

    def inflate(self, pad: float) -> "Window":
        """Region grown by ``pad`` in L∞ distance (annuli grow into their outer ball)."""
        if self.kind in (WindowKind.BALL, WindowKind.ANNULUS):
            return Window.ball(self.radius + pad, self.center)
        x1, x2, y1, y2 = self.square()
        return Window.rectangle(x1 - pad, x2 + pad, y1 - pad, y2 + pad)

    def bounding_grid(self) -> Grid:
        if self.kind == WindowKind.PARALLELOGRAM:
            x0, x1, y0, y1 = (int(v) for v in self.extents)
            return Grid(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
        x1, x2, y1, y2 = self.square()
        ymin = math.ceil(y1 / SQRT3_2 - EPS)
        ymax = math.floor(y2 / SQRT3_2 + EPS)
        if ymax < ymin:
            return Grid(0, 0, 0, 0)
        xmin = math.ceil(x1 - ymax / 2.0 - EPS)
        xmax = math.floor(x2 - ymin / 2.0 + EPS)
        if xmax < xmin:
            return Grid(0, 0, 0, 0)
        return Grid(xmin, ymin, xmax - xmin + 1, ymax - ymin + 1)

    def mask_on(self, grid: Grid) -> np.ndarray:
        """Boolean membership array over ``grid``."""
        if grid.size == 0:
            return np.zeros(grid.shape, dtype=bool)
        if self.kind == WindowKind.PARALLELOGRAM:
            x, y = grid.axial()
            x0, x1, y0, y1 = self.extents
            return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        ex, ey = grid.embedded()
        if self.kind == WindowKind.RECTANGLE:
            x1, x2, y1, y2 = self.extents
            return (ex >= x1 - EPS) & (ex <= x2 + EPS) & (ey >= y1 - EPS) & (ey <= y2 + EPS)
        d = linf(ex - self.center[0], ey - self.center[1])
        if self.kind == WindowKind.BALL:
            return d <= self.extents[0] + EPS
        n1, n2 = self.extents
        return (d <= n2 + EPS) & (d > n1 + EPS)

    def contains(self, v: Sequence[int]) -> bool:
        grid = Grid(int(v[0]), int(v[1]), 1, 1)
        return bool(self.mask_on(grid)[0, 0])

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "center": list(self.center), "extents": list(self.extents)}

    @classmethod
    def from_dict(cls, data: dict) -> "Window":
        return cls(WindowKind(data["kind"]), tuple(data["center"]), tuple(data["extents"]))


# =============================================================================
# SITE ENUMERATION
# =============================================================================

@lru_cache(maxsize=256)
def window_mask(window: Window) -> Tuple[Grid, np.ndarray]:
    """Bounding grid of a window with its (read-only) membership mask."""
    grid = window.bounding_grid()
    return grid, _frozen(window.mask_on(grid))


def sites_in(window: Window) -> List[SiteCoord]:
    """All sites of ``window`` in row-major order."""
    grid, mask = window_mask(window)
    return grid.sites(mask)


def site_array(window: Window) -> np.ndarray:
    grid, mask = window_mask(window)
    return grid.coords(mask)


def count_sites(window: Window) -> int:
    return int(window_mask(window)[1].sum())


def count_ball_sites(radius: float, center: Tuple[float, float] = (0.0, 0.0)) -> int:
    """
    Number of sites in the closed L∞ ball, counted row by row.

    Works for radii far beyond what can be enumerated as an array.
    """
    if radius < 0:
        return 0
    cx, cy = center
    ymin = math.ceil((cy - radius) / SQRT3_2 - EPS)
    ymax = math.floor((cy + radius) / SQRT3_2 + EPS)
    if ymax < ymin:
        return 0
    y = np.arange(ymin, ymax + 1, dtype=np.float64)
    hi = np.floor(cx + radius - y / 2.0 + EPS)
    lo = np.ceil(cx - radius - y / 2.0 - EPS)
    return int(np.clip(hi - lo + 1, 0, None).sum())


# =============================================================================
# BOUNDARIES
# =============================================================================

def side_mask(window: Window, side: BoundarySide, grid: Optional[Grid] = None) -> np.ndarray:
    """
    Boundary sites of ``window`` as a mask over ``grid`` (default: its bounding grid).

    inner: sites of the window with a neighbour outside it.
    outer: sites outside the window with a neighbour inside (the grid must
        leave room for them).
    left/right/top/bottom: sites of the window with a neighbour beyond that
        side's line; for parallelograms, the extreme axial column or row.
    """
    if grid is None:
        grid = window.bounding_grid()
        if side == BoundarySide.OUTER:
            grid = grid.expand(1)
    inside = window.mask_on(grid)
    if side == BoundarySide.INNER:
        return inside & any_neighbor(~inside, fill=True)
    if side == BoundarySide.OUTER:
        return ~inside & any_neighbor(inside, fill=False)

    if window.kind == WindowKind.PARALLELOGRAM:
        x, y = grid.axial()
        x0, x1, y0, y1 = window.extents
        line = {
            BoundarySide.LEFT: x == x0,
            BoundarySide.RIGHT: x == x1,
            BoundarySide.BOTTOM: y == y0,
            BoundarySide.TOP: y == y1,
        }[side]
        return inside & line

    x1, x2, y1, y2 = window.square()
    ex, ey = grid.embedded()
    beyond = np.zeros(grid.shape, dtype=bool)
    for dx, dy in OFFSETS:
        nx = ex + dx + dy / 2.0
        ny = ey + dy * SQRT3_2
        if side == BoundarySide.LEFT:
            beyond |= nx < x1 - EPS
        elif side == BoundarySide.RIGHT:
            beyond |= nx > x2 + EPS
        elif side == BoundarySide.BOTTOM:
            beyond |= ny < y1 - EPS
        else:
            beyond |= ny > y2 + EPS
    return inside & beyond


def boundary(window: Window, side: BoundarySide) -> List[SiteCoord]:
    """Boundary sites of ``window`` on ``side``, in row-major order."""
    grid = window.bounding_grid()
    if side == BoundarySide.OUTER:
        grid = grid.expand(1)
    return grid.sites(side_mask(window, side, grid))


@lru_cache(maxsize=256)
def cached_side_mask(window: Window, side: BoundarySide) -> np.ndarray:
    """Read-only side mask over the window's bounding grid."""
    return _frozen(side_mask(window, side, window.bounding_grid()))


# =============================================================================
# ANNULUS CONTACTS
# =============================================================================

@dataclass(frozen=True)
class AnnulusGeometry:
    """
    Masks describing an annulus on a grid.

    ``inner_contact`` are sites of the annulus next to the inner ball,
    ``outer_contact`` sites next to the complement of the outer ball.
    ``angle`` is the polar angle of every grid site about the centre.
    """
    grid: Grid
    mask: np.ndarray
    inner_contact: np.ndarray
    outer_contact: np.ndarray
    angle: np.ndarray


@lru_cache(maxsize=64)
def annulus_geometry(annulus: Window, grid: Grid) -> AnnulusGeometry:
    if annulus.kind != WindowKind.ANNULUS:
        raise WindowError("Expected an annulus window")
    n1, n2 = annulus.extents
    if n2 <= n1:
        raise WindowError(f"Degenerate annulus ({n1}, {n2})")
    if count_sites(annulus.inner_ball()) == 0:
        raise WindowError(f"Inner ball of radius {n1} contains no site")
    mask = annulus.mask_on(grid)
    if int(mask.sum()) != count_sites(annulus):
        raise WindowError("Annulus is not contained in the configuration window")
    if not mask.any():
        raise WindowError(f"Degenerate annulus ({n1}, {n2})")
    inner_ball = annulus.inner_ball().mask_on(grid)
    outer_ball = annulus.outer_ball().mask_on(grid)
    inner_contact = mask & any_neighbor(inner_ball, fill=False)
    outer_contact = mask & any_neighbor(~outer_ball, fill=True)
    ex, ey = grid.embedded()
    angle = np.arctan2(ey - annulus.center[1], ex - annulus.center[0])
    return AnnulusGeometry(
        grid=grid,
        mask=_frozen(mask),
        inner_contact=_frozen(inner_contact),
        outer_contact=_frozen(outer_contact),
        angle=_frozen(angle),
    )


def require_inside(window: Window, grid: Grid, domain: np.ndarray) -> Tuple[Tuple[slice, slice], Grid, np.ndarray]:
    """
    Locate ``window`` inside a configuration grid.

    Returns:
        (slices into the configuration arrays, the window's grid, its mask)

    Raises:
        WindowError: if some site of ``window`` is not in ``domain``
    """
    sub, mask = window_mask(window)
    if sub.size == 0 or not mask.any():
        raise WindowError(f"Window {window.kind.value} {window.extents} contains no site")
    try:
        slices = grid.slices_for(sub)
    except WindowError as e:
        raise WindowError(f"Window {window.kind.value} {window.extents} is not contained in the configuration") from e
    if np.any(mask & ~domain[slices]):
        raise WindowError(f"Window {window.kind.value} {window.extents} is not contained in the configuration")
    return slices, sub, mask


def iter_sites(window: Window) -> Iterable[SiteCoord]:
    grid, mask = window_mask(window)
    for flat in np.flatnonzero(mask):
        yield grid.site(flat)
