"""
Heavy-tailed impurities ("holes").

Every site v independently carries a hole with probability π = min(1, c3·m^-β).
A hole is the closed L∞ ball of radius r_v around v, with

    P(r ≥ x) = min(1, c1·x^(α-2)·e^(-c2·x/m))   for x ≥ 1,

and the remaining mass at r = 0 (a radius-0 hole still removes its centre).
Percolation with impurities forces every covered site vacant.

Geometric hole events are evaluated on the continuous hole squares: hole
(v, r) meets the boundary square of B_n(z) iff n - r ≤ d ≤ n + r with
d = ‖embed(v) - z‖∞.
"""
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import lambertw

from nearcrit.arms import ArmSpec, crossing_union, detect_arm_event
from nearcrit.errors import TooManyHolesError, WindowError
from nearcrit.lattice import (
    EPS,
    SQRT3_2,
    Grid,
    SiteCoord,
    Window,
    WindowKind,
    count_ball_sites,
    embed_arrays,
    linf,
    site_array,
)
from nearcrit.messages import DOMAIN_BOUNDARY_FLAG
from nearcrit.percolation import OCCUPIED, VACANT, Color, SiteConfig, _annulus_on, sample
from nearcrit.services.seeding import SeedLike, as_rng

logger = logging.getLogger(__name__)

# one-arm exponent threshold of the phase diagram
THREE_QUARTERS = 0.75
DEFAULT_PAD_SCALES = 4.0
DEFAULT_MAX_HOLES = 20

# exp() overflows past this; Lambert W is then solved from its logarithm
_LOG_Z_LIMIT = 700.0


# =============================================================================
# PHASE DIAGRAM
# =============================================================================

class Domain(str, enum.Enum):
    """Regions of the (α, β) phase diagram."""
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"


def classify_domain(alpha: float, beta: float) -> Domain:
    """
    Domain of (α, β): IV if β ≤ α; else I if α ∈ (3/4, 2); else II if β > 3/4;
    else III.

    Raises:
        ValueError: if α ≥ 2 or β ≤ 0
    """
    if alpha >= 2:
        raise ValueError(f"alpha must be below 2, got {alpha}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if beta <= alpha:
        return Domain.IV
    if alpha > THREE_QUARTERS:
        return Domain.I
    if beta > THREE_QUARTERS:
        return Domain.II
    return Domain.III


def on_domain_boundary(alpha: float, beta: float) -> bool:
    """Ties at α = 3/4, β = 3/4 or β = α are decided by a convention; flag them."""
    return alpha == THREE_QUARTERS or beta == THREE_QUARTERS or beta == alpha


def describe_domain(alpha: float, beta: float) -> str:
    domain = classify_domain(alpha, beta)
    text = domain.value
    if on_domain_boundary(alpha, beta):
        text += f" ({DOMAIN_BOUNDARY_FLAG})"
    return text


# =============================================================================
# LAW
# =============================================================================

@dataclass(frozen=True)
class HoleParams:
    """Parameters of the hole law at truncation scale ``m``."""
    m: float
    alpha: float
    beta: float
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self) -> None:
        if self.m <= 0:
            raise ValueError("m must be positive")
        if self.alpha >= 2:
            raise ValueError("alpha must be below 2")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("c1 and c2 must be positive")
        if self.c3 < 0:
            raise ValueError("c3 must be non-negative")

    @property
    def pi(self) -> float:
        """Probability that a given site carries a hole."""
        return min(1.0, self.c3 * self.m ** (-self.beta))

    def tail(self, x):
        """P(r ≥ x), vectorised."""
        x = np.asarray(x, dtype=float)
        xs = np.maximum(x, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            value = self.c1 * xs ** (self.alpha - 2.0) * np.exp(-self.c2 * xs / self.m)
        value = np.minimum(1.0, value)
        out = np.where(x <= 0, 1.0, value)
        return float(out) if out.ndim == 0 else out

    def radius_for(self, u):
        """
        Inverse tail: the radius r with tail(r) = u, or 0 when u > tail(1).

        Solves (2-α)·ln r + (c2/m)·r = ln c1 - ln u through the principal
        branch of Lambert W.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        r = np.zeros_like(u)
        big = u <= self.tail(1.0)
        if np.any(big):
            a = 2.0 - self.alpha
            k = self.c2 / self.m
            b = math.log(self.c1) - np.log(u[big])
            log_z = math.log(k / a) + b / a
            w = np.empty_like(log_z)
            small = log_z <= _LOG_Z_LIMIT
            w[small] = lambertw(np.exp(log_z[small])).real
            w[~small] = _lambertw_from_log(log_z[~small])
            r[big] = np.maximum(1.0, (a / k) * w)
        return r

    def to_dict(self) -> dict:
        return {"m": self.m, "alpha": self.alpha, "beta": self.beta, "c1": self.c1, "c2": self.c2, "c3": self.c3}

    @classmethod
    def from_dict(cls, data: dict) -> "HoleParams":
        return cls(**{k: float(data[k]) for k in ("m", "alpha", "beta", "c1", "c2", "c3")})


def _lambertw_from_log(log_z: np.ndarray) -> np.ndarray:
    """W0(e^log_z) for large log_z: Newton on w + ln w = log_z."""
    w = log_z - np.log(log_z)
    for _ in range(8):
        w = w - (w + np.log(w) - log_z) / (1.0 + 1.0 / w)
    return w


def domain_one_defaults(m: float, upsilon: float = 0.02, upsilon_prime: float = 0.06) -> HoleParams:
    """α = 55/48 + υ, β = α + υ′ with unit constants."""
    alpha = 55.0 / 48.0 + upsilon
    return HoleParams(m=m, alpha=alpha, beta=alpha + upsilon_prime)


# =============================================================================
# CONFIGURATIONS
# =============================================================================

@dataclass
class HoleConfig:
    """
    Sampled holes: centres (K, 2) in axial coordinates, radii (K,).

    Centres were drawn in ``window`` inflated by ``pad``.
    """
    params: HoleParams
    centers: np.ndarray
    radii: np.ndarray
    window: Window
    pad: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.radii.size)

    def holes(self) -> List[Tuple[SiteCoord, float]]:
        return [(SiteCoord(int(x), int(y)), float(r)) for (x, y), r in zip(self.centers, self.radii)]

    def embedded_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        return embed_arrays(self.centers[:, 0].astype(float), self.centers[:, 1].astype(float))

    def subset(self, indices: Sequence[int]) -> "HoleConfig":
        idx = np.asarray(list(indices), dtype=np.int64)
        return HoleConfig(self.params, self.centers[idx], self.radii[idx], self.window, self.pad, dict(self.metadata))

    @classmethod
    def from_holes(cls, params: HoleParams, holes: Iterable[Tuple[Sequence[int], float]], window: Window) -> "HoleConfig":
        holes = list(holes)
        centers = np.array([[int(v[0]), int(v[1])] for v, _ in holes], dtype=np.int64).reshape(-1, 2)
        radii = np.array([float(r) for _, r in holes], dtype=float)
        return cls(params, centers, radii, window)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "window": self.window.to_dict(),
            "pad": self.pad,
            "metadata": self.metadata,
            "holes": [[int(x), int(y), float(r)] for (x, y), r in zip(self.centers, self.radii)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HoleConfig":
        holes = data.get("holes", [])
        centers = np.array([[h[0], h[1]] for h in holes], dtype=np.int64).reshape(-1, 2)
        radii = np.array([h[2] for h in holes], dtype=float)
        return cls(
            params=HoleParams.from_dict(data["params"]),
            centers=centers,
            radii=radii,
            window=Window.from_dict(data["window"]),
            pad=float(data.get("pad", 0.0)),
            metadata=dict(data.get("metadata", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HoleConfig":
        return cls.from_dict(json.loads(text))


def sample_holes(
    window: Window,
    params: HoleParams,
    seed: SeedLike,
    pad: Optional[float] = None,
    multiplier: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
) -> HoleConfig:
    """
    Sample holes with centres in ``window`` inflated by ``pad`` (default 4m).

    Args:
        multiplier: Optional map (x, y) -> factor applied to π site by site

    The mass of crossing holes centred beyond the pad is at most
    exp(-c2·pad/m), recorded as ``missing_tail``.
    """
    rng = as_rng(seed)
    if pad is None:
        pad = DEFAULT_PAD_SCALES * params.m
    region = window.inflate(pad) if pad > 0 else window
    sites = site_array(region)
    n_sites = sites.shape[0]
    if multiplier is None:
        count = int(rng.binomial(n_sites, params.pi)) if n_sites else 0
        chosen = np.sort(rng.choice(n_sites, size=count, replace=False)) if count else np.zeros(0, dtype=np.int64)
    else:
        pi_v = np.clip(params.pi * np.asarray(multiplier(sites[:, 0], sites[:, 1]), dtype=float), 0.0, 1.0)
        chosen = np.flatnonzero(rng.random(n_sites) < pi_v)
    uniforms = 1.0 - rng.random(chosen.size)
    radii = params.radius_for(uniforms) if chosen.size else np.zeros(0)
    metadata = {
        "missing_tail": math.exp(-params.c2 * pad / params.m),
        "candidate_sites": int(n_sites),
        "homogeneous": multiplier is None,
    }
    logger.debug(f"Sampled {chosen.size} holes over {n_sites} candidate sites")
    return HoleConfig(params, sites[chosen].reshape(-1, 2), np.asarray(radii, dtype=float), window, float(pad), metadata)


def _hole_box(grid: Grid, cx: float, cy: float, r: float) -> Optional[Tuple[slice, slice]]:
    y_lo = max(grid.y0, math.ceil((cy - r) / SQRT3_2 - EPS))
    y_hi = min(grid.y0 + grid.height - 1, math.floor((cy + r) / SQRT3_2 + EPS))
    if y_hi < y_lo:
        return None
    x_lo = max(grid.x0, math.ceil(cx - r - y_hi / 2.0 - EPS))
    x_hi = min(grid.x0 + grid.width - 1, math.floor(cx + r - y_lo / 2.0 + EPS))
    if x_hi < x_lo:
        return None
    return (slice(y_lo - grid.y0, y_hi - grid.y0 + 1), slice(x_lo - grid.x0, x_hi - grid.x0 + 1))


def hole_covers(holes: HoleConfig, grid: Grid, indices: Optional[Iterable[int]] = None) -> List[Tuple[int, Tuple[slice, slice], np.ndarray]]:
    """Per-hole covered cells on ``grid``: (hole index, slices, mask over the slices)."""
    ex, ey = holes.embedded_centers()
    gx, gy = grid.embedded()
    out = []
    for i in (range(len(holes)) if indices is None else indices):
        r = float(holes.radii[i])
        box = _hole_box(grid, ex[i], ey[i], r)
        if box is None:
            continue
        inside = linf(gx[box] - ex[i], gy[box] - ey[i]) <= r + EPS
        if inside.any():
            out.append((int(i), box, inside))
    return out


def hole_cover(holes: HoleConfig, grid: Grid, indices: Optional[Iterable[int]] = None) -> np.ndarray:
    """Union of the holes (all, or ``indices``) as a mask over ``grid``."""
    cover = np.zeros(grid.shape, dtype=bool)
    for _, box, inside in hole_covers(holes, grid, indices):
        cover[box] |= inside
    return cover


def relevant_holes(holes: HoleConfig, window: Window, grid: Optional[Grid] = None) -> List[int]:
    """Indices of holes covering at least one site of ``window``."""
    grid = grid or window.bounding_grid()
    mask = window.mask_on(grid)
    return [i for i, box, inside in hole_covers(holes, grid) if np.any(inside & mask[box])]


def _center_indices(holes: HoleConfig, subset: Iterable[Sequence[int]]) -> List[int]:
    wanted = {(int(v[0]), int(v[1])) for v in subset}
    return [i for i, (x, y) in enumerate(holes.centers) if (int(x), int(y)) in wanted]


def apply_holes(config: SiteConfig, holes: HoleConfig, subset: Optional[Iterable[Sequence[int]]] = None) -> SiteConfig:
    """
    Copy of ``config`` with every occupied site covered by a hole centred in
    ``subset`` (default: all centres) made vacant.
    """
    indices = None if subset is None else _center_indices(holes, subset)
    out = config.copy()
    cover = hole_cover(holes, config.grid, indices) & config.mask
    out.state[cover & (out.state == OCCUPIED)] = VACANT
    return out


def sample_with_holes(
    window: Window,
    p: float,
    params: HoleParams,
    seed: SeedLike,
    pad: Optional[float] = None,
) -> Tuple[SiteConfig, HoleConfig]:
    """Bernoulli(p) configuration and an independent hole configuration, drawn from one stream."""
    rng = as_rng(seed)
    config = sample(window, p, rng)
    holes = sample_holes(window, params, rng, pad=pad)
    return config, holes


# =============================================================================
# HOLE CROSSING EVENTS
# =============================================================================

class HoleVariant(str, enum.Enum):
    """Hole-crossing events of an annulus."""
    H = "H"
    HBAR = "Hbar"
    HBARBAR = "Hbarbar"
    HBARBAR_STAR = "Hbarbar_star"
    BIG_HOLE = "big_hole"


def _distances(holes: HoleConfig, center: Tuple[float, float]) -> np.ndarray:
    ex, ey = holes.embedded_centers()
    return linf(ex - center[0], ey - center[1])


def _hits(d: np.ndarray, r: np.ndarray, n: float) -> np.ndarray:
    return (n - r <= d + EPS) & (d <= n + r + EPS)


def _h(d, r, n1, n2):
    return _hits(d, r, n1) & _hits(d, r, n2)


def _hbarbar(d, r, n1, n2):
    covers_inner = d + n1 <= r + EPS
    return _h(d, r, n1, n2) & ~covers_inner & ~_hits(d, r, 2 * n2)


def detect_hole_crossing(holes: HoleConfig, annulus: Window, variant=HoleVariant.H) -> bool:
    """
    Whether some hole (centred anywhere) realises ``variant`` across ``annulus``.

    H: a hole meets both boundary squares ∂B_{n1} and ∂B_{n2}.
    Hbar: H, and the hole meets neither ∂B_{n1/2} nor ∂B_{2 n2}.
    Hbarbar: H, the hole does not contain B_{n1}, and does not meet ∂B_{2 n2}.
    Hbarbar_star: Hbarbar for some outer radius 2^i·n1, i ≥ 1 (n2 is not used).
    big_hole: H across some dyadic annulus A_{2^h, 2^(h+1)} inside the annulus.

    Raises:
        WindowError: for a malformed annulus, or n1 > n2/2 for the barred variants
    """
    if annulus.kind != WindowKind.ANNULUS:
        raise WindowError("Hole crossings are defined on annuli")
    variant = HoleVariant(variant)
    n1, n2 = annulus.extents
    if variant in (HoleVariant.HBAR, HoleVariant.HBARBAR, HoleVariant.HBARBAR_STAR) and not 1 <= n1 <= n2 / 2:
        raise WindowError(f"{variant.value} needs 1 <= n1 <= n2/2, got ({n1}, {n2})")
    if len(holes) == 0:
        return False
    d = _distances(holes, annulus.center)
    r = holes.radii

    if variant == HoleVariant.H:
        hit = _h(d, r, n1, n2)
    elif variant == HoleVariant.HBAR:
        hit = _h(d, r, n1, n2) & ~_hits(d, r, n1 / 2) & ~_hits(d, r, 2 * n2)
    elif variant == HoleVariant.HBARBAR:
        hit = _hbarbar(d, r, n1, n2)
    elif variant == HoleVariant.HBARBAR_STAR:
        reach = float(np.max(d + r))
        hit = np.zeros(d.shape, dtype=bool)
        outer = 2 * n1
        while outer <= reach + EPS:
            hit |= _hbarbar(d, r, n1, outer)
            outer *= 2
    else:
        hit = np.zeros(d.shape, dtype=bool)
        h = math.ceil(math.log2(max(n1, 1.0)) - EPS)
        while 2 ** (h + 1) <= n2 + EPS:
            hit |= _h(d, r, 2.0 ** h, 2.0 ** (h + 1))
            h += 1
    return bool(np.any(hit))


@dataclass(frozen=True)
class HoleBounds:
    """Explicit union-bound sums for the hole-crossing probabilities."""
    bound_H: float
    bound_Hbarbar: float


def analytic_hole_bounds(params: HoleParams, n1: float, n2: float) -> HoleBounds:
    """
    Upper bounds on P(H(A_{n1,n2})) and P(Hbarbar(A_{n1,n2})).

    bound_H = π·Σ_{i≥0} |B_{2^(i+1) n1}|·P(r ≥ 2^(i-1) n1), summing the
    dyadic shells that hole centres can lie in.

    bound_Hbarbar = Σ_s |{d ∈ [s, s+1)}|·π·(P(r ≥ lo) - P(r ≥ hi)) with
    lo = max(s - n1, n2 - s - 1), hi = min(s + 1 + n1, 2 n2 - s): the radius
    window a hole at distance d ∈ [s, s+1) needs to cross both squares
    without covering B_{n1} or meeting ∂B_{2 n2}.
    """
    if not 1 <= n1 <= n2 / 2:
        raise WindowError(f"Hole bounds need 1 <= n1 <= n2/2, got ({n1}, {n2})")
    pi = params.pi
    if pi == 0:
        return HoleBounds(0.0, 0.0)

    bound_h = 0.0
    for i in range(0, 64):
        radius = (2 ** (i + 1)) * n1
        tail = params.tail((2.0 ** (i - 1)) * n1)
        if tail == 0.0:
            break
        term = count_ball_sites(radius) * pi * tail
        bound_h += term
        if i > 2 and term < 1e-17 * bound_h:
            break

    bound_hbb = 0.0
    inner_count = 0
    for s in range(0, int(math.ceil(2 * n2))):
        outer_count = count_ball_sites(s + 1 - 1e-6)
        shell = outer_count - inner_count
        inner_count = outer_count
        lo = max(s - n1, n2 - s - 1)
        hi = min(s + 1 + n1, 2 * n2 - s)
        if hi < lo or shell == 0:
            continue
        bound_hbb += shell * pi * max(0.0, params.tail(lo) - params.tail(hi))
    return HoleBounds(bound_H=float(bound_h), bound_Hbarbar=float(bound_hbb))


# =============================================================================
# W4
# =============================================================================

def _gray_flips(k: int) -> Iterable[int]:
    """Bit toggled at each step of the reflected Gray code over k bits."""
    for step in range(1, 2 ** k):
        yield (step & -step).bit_length() - 1


def detect_W4(
    config: SiteConfig,
    holes: HoleConfig,
    annulus: Window,
    max_holes: int = DEFAULT_MAX_HOLES,
    spec: Optional[ArmSpec] = None,
) -> bool:
    """
    Whether removing the holes of some subset U yields four alternating arms.

    A hole only matters through the occupied sites of the annulus it covers.
    Holes covering none of the occupied crossing clusters are always removed:
    occupied arms of any ω^(U) lie in those clusters, and extra vacant sites
    never break an arm event. Holes with equal effect count once. The rest
    are enumerated in Gray-code order from U = ∅ with an early exit, after
    two necessary conditions: the occupied arms already exist without
    removals, and the vacant arms exist once every hole is removed.

    Raises:
        TooManyHolesError: if more than ``max_holes`` holes remain to enumerate
    """
    spec = spec or ArmSpec.alternating(4)
    geometry = _annulus_on(config, annulus)
    width = config.grid.shape[1]
    occupied = (config.state == OCCUPIED) & geometry.mask

    n_occupied = spec.count(Color.OCCUPIED)
    if n_occupied and not detect_arm_event(config, annulus, ArmSpec((Color.OCCUPIED,) * n_occupied)):
        return False

    o_cross = crossing_union(occupied, geometry)
    base = config.copy()
    free = []
    seen = set()
    for _, box, inside in hole_covers(holes, config.grid):
        hit = inside & occupied[box]
        if not hit.any():
            continue
        if not np.any(hit & o_cross[box]):
            base.state[box][hit] = VACANT
            continue
        rows, cols = np.nonzero(hit)
        key = ((rows + box[0].start) * width + cols + box[1].start).tobytes()
        if key not in seen:
            seen.add(key)
            free.append((box, hit))

    n_vacant = spec.count(Color.VACANT)
    if n_vacant:
        everything = base.copy()
        for box, hit in free:
            everything.state[box][hit] = VACANT
        if not detect_arm_event(everything, annulus, ArmSpec((Color.VACANT,) * n_vacant)):
            return False

    if len(free) > max_holes:
        raise TooManyHolesError(f"{len(free)} holes left to enumerate; exact search is capped at {max_holes}")
    logger.debug(f"W4 search over {len(free)} holes")

    work = base.copy()
    if detect_arm_event(work, annulus, spec):
        return True
    count = np.zeros(config.grid.shape, dtype=np.int16)
    chosen = [False] * len(free)
    for bit in _gray_flips(len(free)):
        box, hit = free[bit]
        chosen[bit] = not chosen[bit]
        count[box] += np.where(hit, 1 if chosen[bit] else -1, 0).astype(np.int16)
        sub = work.state[box]
        sub[:] = base.state[box]
        sub[count[box] > 0] = VACANT
        if detect_arm_event(work, annulus, spec):
            logger.debug(f"W4 witness found with {sum(chosen)} holes removed")
            return True
    return False
