"""
Rendering of configurations, fire timelines and hole configurations.

Each site is drawn as a square block; row y is shifted right by half a block
per unit of y, which reproduces the triangular lattice's sheared embedding.
Rows with larger y are drawn higher. Cells of the bounding grid that are not
in the window take the vacant colour.
"""
import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.image as mpimg  # noqa: E402
import numpy as np  # noqa: E402

from nearcrit import config as settings  # noqa: E402
from nearcrit.errors import RenderError  # noqa: E402
from nearcrit.forestfire import FireTimeline  # noqa: E402
from nearcrit.impurities import HoleConfig, hole_cover  # noqa: E402
from nearcrit.percolation import BURNT, OCCUPIED, SiteConfig  # noqa: E402

logger = logging.getLogger(__name__)

OCCUPIED_RGB = (0, 109, 44)
VACANT_RGB = (255, 255, 255)
BURNT_RGB = (37, 37, 37)
SCAR_RGB = (150, 150, 150)
HOLE_RGB = (203, 24, 29)
EARLY_BURN_RGB = (8, 48, 107)
LATE_BURN_RGB = (198, 219, 239)

SVG_HASH_SALT = "nearcrit"


class Colormap(str, enum.Enum):
    TRI_STATE = "tri-state"
    BURN_TIME_GRADIENT = "burn-time-gradient"
    HOLES_OVERLAY = "holes-overlay"
    BURNT_BEFORE = "burnt-before"


class ImageFormat(str, enum.Enum):
    PPM = "ppm"
    PNG = "png"
    SVG = "svg"

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> "ImageFormat":
        suffix = Path(path).suffix.lower().lstrip(".")
        try:
            return cls(suffix)
        except ValueError:
            raise RenderError(f"Unknown image format '.{suffix}' (use .ppm, .png or .svg)") from None


Source = Union[SiteConfig, FireTimeline, HoleConfig]


@dataclass
class RenderSpec:
    """
    What to draw and how.

    ``base`` is the configuration under a ``HoleConfig`` source (an empty
    configuration of the holes' window when omitted). ``time`` is the cut-off
    of the burnt-before colormap.
    """
    source: Source
    colormap: Colormap = Colormap.TRI_STATE
    cell: int = 4
    fmt: Optional[ImageFormat] = None
    base: Optional[SiteConfig] = None
    time: Optional[float] = None
    header: str = ""

    def __post_init__(self) -> None:
        try:
            self.colormap = Colormap(self.colormap)
        except ValueError:
            raise RenderError(f"Unknown colormap '{self.colormap}'") from None
        if self.cell < 1:
            raise RenderError("cell size must be at least 1 pixel")


# =============================================================================
# COLOURING
# =============================================================================

def _tri_state(config: SiteConfig) -> np.ndarray:
    rgb = np.empty(config.grid.shape + (3,), dtype=np.uint8)
    rgb[:] = VACANT_RGB
    rgb[config.mask & (config.state == OCCUPIED)] = OCCUPIED_RGB
    rgb[config.mask & (config.state == BURNT)] = BURNT_RGB
    return rgb


def _burn_gradient(config: SiteConfig) -> np.ndarray:
    """Burnt sites from dark (earliest burn) to light (latest burn)."""
    rgb = _tri_state(config)
    if config.burn_time is None:
        return rgb
    burnt = config.mask & (config.state == BURNT)
    timed = burnt & np.isfinite(config.burn_time)
    rgb[burnt & ~timed] = SCAR_RGB
    if timed.any():
        t = config.burn_time[timed]
        span = t.max() - t.min()
        frac = (t - t.min()) / span if span > 0 else np.zeros_like(t)
        dark = np.asarray(EARLY_BURN_RGB, dtype=float)
        light = np.asarray(LATE_BURN_RGB, dtype=float)
        rgb[timed] = np.rint(dark + frac[:, None] * (light - dark)).astype(np.uint8)
    return rgb


def _cells(spec: RenderSpec) -> np.ndarray:
    source = spec.source
    if spec.colormap == Colormap.HOLES_OVERLAY:
        if not isinstance(source, HoleConfig):
            raise RenderError("holes-overlay needs a hole configuration")
        base = spec.base if spec.base is not None else SiteConfig.empty(source.window)
        rgb = _tri_state(base)
        rgb[hole_cover(source, base.grid) & base.mask] = HOLE_RGB
        return rgb

    if isinstance(source, HoleConfig):
        raise RenderError(f"{spec.colormap.value} cannot draw a hole configuration")

    if spec.colormap == Colormap.BURNT_BEFORE:
        if not isinstance(source, FireTimeline):
            raise RenderError("burnt-before needs a fire timeline")
        if spec.time is None:
            raise RenderError("burnt-before needs a time")
        config = source.state_at(spec.time)
        rgb = _tri_state(config)
        rgb[config.mask & (config.state == BURNT)] = HOLE_RGB
        return rgb

    config = source.final if isinstance(source, FireTimeline) else source
    if spec.colormap == Colormap.BURN_TIME_GRADIENT:
        return _burn_gradient(config)
    return _tri_state(config)


def rasterize(spec: RenderSpec) -> np.ndarray:
    """
    RGB canvas (uint8, rows top to bottom) for ``spec``.

    Raises:
        RenderError: if the canvas exceeds NEARCRIT_MAX_RENDER_PIXELS
    """
    cells = _cells(spec)
    h, w = cells.shape[:2]
    c = spec.cell
    width = w * c + ((h - 1) * c) // 2
    height = h * c
    if width * height > settings.MAX_RENDER_PIXELS:
        raise RenderError(
            f"Canvas {width}x{height} exceeds the limit of {settings.MAX_RENDER_PIXELS} pixels"
        )
    canvas = np.empty((height, width, 3), dtype=np.uint8)
    canvas[:] = VACANT_RGB
    for iy in range(h):
        row = np.repeat(cells[iy], c, axis=0)
        shift = (iy * c) // 2
        top = (h - 1 - iy) * c
        canvas[top:top + c, shift:shift + w * c] = row[None, :, :]
    return canvas


# =============================================================================
# OUTPUT
# =============================================================================

def ppm_bytes(canvas: np.ndarray, header: str = "") -> bytes:
    """Binary PPM (P6, maxval 255); ``header`` becomes a single comment line."""
    height, width = canvas.shape[:2]
    comment = " ".join(header.split())
    head = "P6\n"
    if comment:
        head += f"# {comment}\n"
    head += f"{width} {height}\n255\n"
    return head.encode("ascii", errors="replace") + np.ascontiguousarray(canvas, dtype=np.uint8).tobytes()


def render(spec: RenderSpec, path: Union[str, Path]) -> Path:
    """
    Write ``spec`` to ``path``; the format comes from ``spec.fmt`` or the suffix.

    Output is byte-identical for identical inputs: PNG carries no software
    tag and SVG ids are salted with a fixed string.
    """
    path = Path(path)
    fmt = ImageFormat(spec.fmt) if spec.fmt is not None else ImageFormat.from_path(path)
    canvas = rasterize(spec)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == ImageFormat.PPM:
        path.write_bytes(ppm_bytes(canvas, spec.header))
    elif fmt == ImageFormat.PNG:
        metadata = {"Software": None}
        if spec.header:
            metadata["Description"] = spec.header
        mpimg.imsave(path, canvas, format="png", metadata=metadata)
    else:
        with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
            mpimg.imsave(path, canvas, format="svg", metadata={"Date": None, "Creator": None})
    logger.info(f"Rendered {spec.colormap.value} image {canvas.shape[1]}x{canvas.shape[0]} to {path}")
    return path
