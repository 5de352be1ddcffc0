"""
Forest fire dynamics on a finite window.

Every site receives an Exp(1) birth time, after which it is occupied.
Lightning strikes each site at rate ζ; a strike on an occupied site burns its
whole occupied cluster at once. Without recovery burnt sites stay burnt;
with recovery they become vacant and regrow after a fresh Exp(1) delay.

Also here: the pure birth process, the Y-process lower bound (pure birth
minus independent clusters removed at ignition marks), the measurement of
the induced hole law, and burning-probability estimators.
"""
import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nearcrit.lattice import (
    OFFSETS,
    BoundarySide,
    Grid,
    SiteCoord,
    Window,
    any_neighbor,
    cached_side_mask,
    linf,
    window_mask,
)
from nearcrit.messages import PROXY_LABEL
from nearcrit.percolation import BURNT, OCCUPIED, VACANT, SiteConfig, label_mask
from nearcrit.scales import T_C, AnalyticBackend, ScaleBackend, p_of_t
from nearcrit.services.seeding import BIRTHS, IGNITIONS, MARKS, RECOVERY, child_seed, make_rng
from nearcrit.services.stats import EstimateResult, estimate_event
from nearcrit.services.unionfind import UnionFind

logger = logging.getLogger(__name__)

# Clusters larger than this are extracted with ndimage instead of a Python flood fill.
FLOOD_FILL_LIMIT = 2048
# Union-find is compacted once this fraction of the window burnt since the last rebuild.
REBUILD_FRACTION = 0.25
ONE_ARM_ALPHA = 55.0 / 48.0


# =============================================================================
# OPTIONS AND TIMELINE
# =============================================================================

@dataclass
class FireOptions:
    """
    Parameters of one forest fire run.

    ``stop_ignitions_at`` discards lightning after that time. ``burn_boundary``
    kills the outer boundary of every burnt cluster forever. ``recovery`` lets
    burnt sites regrow. ``until_all_burnt`` runs until no site can still be
    occupied (t_end must then be infinite).
    """
    zeta: float
    t_end: float
    region: Window
    stop_ignitions_at: Optional[float] = None
    burn_boundary: bool = False
    recovery: bool = False
    until_all_burnt: bool = False

    def __post_init__(self) -> None:
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")
        if self.until_all_burnt:
            if self.recovery:
                raise ValueError("until_all_burnt cannot end with recovery")
            if self.zeta == 0:
                raise ValueError("until_all_burnt needs zeta > 0")
            self.t_end = math.inf
        elif not (0 <= self.t_end < math.inf):
            raise ValueError("t_end must be finite and non-negative")
        if self.stop_ignitions_at is not None and not 0 <= self.stop_ignitions_at <= self.t_end:
            raise ValueError("stop_ignitions_at must lie in [0, t_end]")

    @property
    def ignition_cutoff(self) -> float:
        return self.t_end if self.stop_ignitions_at is None else self.stop_ignitions_at

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "t_end": self.t_end,
            "region": self.region.to_dict(),
            "stop_ignitions_at": self.stop_ignitions_at,
            "burn_boundary": self.burn_boundary,
            "recovery": self.recovery,
            "until_all_burnt": self.until_all_burnt,
        }


@dataclass(frozen=True)
class BurnEvent:
    """A cluster burnt by the lightning at ``site`` at ``time``."""
    time: float
    site: SiteCoord
    sites: np.ndarray = field(repr=False)
    occupied_before: int = 0

    @property
    def size(self) -> int:
        return int(self.sites.size)


@dataclass
class FireTimeline:
    """
    Full record of a run.

    ``sites`` of each burn are flat indices into ``final.grid`` (sorted).
    Ignitions are kept in time order as (time, flat index) arrays.
    """
    options: FireOptions
    seed: int
    birth_time: np.ndarray
    ignition_times: np.ndarray
    ignition_sites: np.ndarray
    burns: List[BurnEvent]
    final: SiteConfig
    end_time: float
    rebirths: int = 0
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.final.grid

    def ignitions(self) -> Dict[SiteCoord, List[float]]:
        out: Dict[SiteCoord, List[float]] = {}
        for t, f in zip(self.ignition_times, self.ignition_sites):
            out.setdefault(self.grid.site(f), []).append(float(t))
        return out

    def burn_sites(self, event: BurnEvent) -> List[SiteCoord]:
        return [self.grid.site(f) for f in event.sites]

    def state_at(self, t: float) -> SiteConfig:
        """
        Configuration at time t, rebuilt from birth and burn times.

        Raises:
            ValueError: for runs with recovery, whose sites may cycle
        """
        if self.options.recovery:
            raise ValueError("state_at needs a run without recovery")
        config = SiteConfig.empty(self.options.region)
        with np.errstate(invalid="ignore"):
            born = self.birth_time <= t
            burnt = self.final.burn_time <= t
        config.state[config.mask & born & ~burnt] = OCCUPIED
        config.state[config.mask & burnt] = BURNT
        config.birth_time = self.birth_time
        config.burn_time = np.where(burnt, self.final.burn_time, np.nan)
        return config

    def burn_rows(self) -> List[dict]:
        return [
            {"time": e.time, "x": e.site.x, "y": e.site.y, "size": e.size}
            for e in self.burns
        ]

    def to_dict(self) -> dict:
        grid = self.grid
        mask = self.final.mask
        born = np.flatnonzero(mask & np.isfinite(self.birth_time))
        return {
            "options": self.options.to_dict(),
            "seed": self.seed,
            "end_time": self.end_time,
            "rebirths": self.rebirths,
            "births": [[*grid.site(f), float(self.birth_time.flat[f])] for f in born],
            "ignitions": [[*grid.site(f), float(t)] for t, f in zip(self.ignition_times, self.ignition_sites)],
            "burns": [
                {"time": e.time, "site": list(e.site), "sites": [list(grid.site(f)) for f in e.sites]}
                for e in self.burns
            ],
            "final": [[*v, s] for v, s in self.final.iter_states()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# =============================================================================
# PURE BIRTH
# =============================================================================

def birth_times(window: Window, seed: int) -> Tuple[Grid, np.ndarray, np.ndarray]:
    """Exp(1) birth time of every cell of the window's grid (NaN off the window)."""
    grid, mask = window_mask(window)
    times = make_rng(seed, BIRTHS).standard_exponential(grid.shape)
    times[~mask] = np.nan
    return grid, mask, times


def simulate_pure_birth(window: Window, t: float, seed: int) -> SiteConfig:
    """X_t: a site is occupied iff its birth time is at most t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    grid, mask, times = birth_times(window, seed)
    config = SiteConfig.empty(window)
    born = mask & (times <= t)
    config.state[born] = OCCUPIED
    config.birth_time = np.where(born, times, np.nan)
    return config


# =============================================================================
# FOREST FIRE
# =============================================================================

def neighbor_table(grid: Grid, mask: np.ndarray) -> np.ndarray:
    """(cells, 6) flat indices of in-window neighbours, -1 where absent."""
    h, w = grid.shape
    iy, ix = np.divmod(np.arange(h * w), w)
    table = np.full((h * w, len(OFFSETS)), -1, dtype=np.int64)
    flat_mask = mask.ravel()
    for k, (dx, dy) in enumerate(OFFSETS):
        ny = iy + dy
        nx = ix + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        j = np.where(ok, ny * w + nx, 0)
        ok &= flat_mask[j]
        table[:, k] = np.where(ok, j, -1)
    table[~flat_mask] = -1
    return table


class _FireEngine:
    """Event loop state of one forest fire run."""

    def __init__(self, options: FireOptions, seed: int, observer=None) -> None:
        self.options = options
        self.seed = seed
        self.observer = observer
        self.grid, self.mask, self.birth = birth_times(options.region, seed)
        self.config = SiteConfig.empty(options.region)
        self.state = self.config.state.reshape(-1)
        self.flat_mask = self.mask.ravel()
        self.n_sites = int(self.flat_mask.sum())
        self.nbrs = neighbor_table(self.grid, self.mask)
        self.uf = UnionFind(self.grid.size)
        self.scar = np.zeros(self.grid.size, dtype=bool)
        self.burn_time = np.full(self.grid.size, np.nan)
        self.first_birth = np.full(self.grid.size, np.nan)
        self.burns: List[BurnEvent] = []
        self.ign_times: List[float] = []
        self.ign_sites: List[int] = []
        self.occupied = 0
        self.dead = 0
        self.rebirths = 0
        self.rebuilds = 0
        self.burnt_since_rebuild = 0
        self.heap: List[Tuple[float, int]] = []

    def occupy(self, f: int, t: float) -> None:
        if self.state[f] != VACANT or self.scar[f]:
            return
        self.state[f] = OCCUPIED
        if math.isnan(self.first_birth[f]):
            self.first_birth[f] = t
        self.occupied += 1
        self.uf.add(f)
        for j in self.nbrs[f]:
            if j >= 0 and self.state[j] == OCCUPIED:
                self.uf.union(f, j)

    def extract_cluster(self, f: int) -> np.ndarray:
        if self.uf.set_size(f) > FLOOD_FILL_LIMIT:
            label, _ = label_mask(self.config.state == OCCUPIED)
            flat = label.ravel()
            return np.flatnonzero(flat == flat[f])
        seen = {f}
        stack = [f]
        state = self.state
        nbrs = self.nbrs
        while stack:
            u = stack.pop()
            for j in nbrs[u]:
                if j >= 0 and state[j] == OCCUPIED and j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        return np.array(sorted(seen), dtype=np.int64)

    def burn(self, f: int, t: float) -> None:
        cluster = self.extract_cluster(f)
        event = BurnEvent(time=t, site=self.grid.site(f), sites=cluster, occupied_before=self.occupied)
        if self.observer is not None:
            self.observer(self.config.state.copy(), event)
        self.burns.append(event)
        self.occupied -= cluster.size
        self.burn_time[cluster] = t
        self.uf.active[cluster] = False
        if self.options.recovery:
            self.state[cluster] = VACANT
            delays = make_rng(self.seed, RECOVERY, len(self.burns)).standard_exponential(cluster.size)
            for site, delay in zip(cluster, delays):
                heapq.heappush(self.heap, (t + float(delay), int(site)))
        else:
            self.state[cluster] = BURNT
            self.dead += cluster.size
        if self.options.burn_boundary:
            ring = np.unique(self.nbrs[cluster].ravel())
            ring = ring[ring >= 0]
            ring = ring[(self.state[ring] == VACANT) & ~self.scar[ring]]
            ring = ring[~np.isin(ring, cluster)]
            self.scar[ring] = True
            self.state[ring] = BURNT
            self.dead += ring.size
        self.burnt_since_rebuild += cluster.size
        if self.burnt_since_rebuild > REBUILD_FRACTION * self.n_sites:
            label, _ = label_mask(self.config.state == OCCUPIED)
            self.uf.rebuild(label)
            self.burnt_since_rebuild = 0
            self.rebuilds += 1

    def run(self) -> FireTimeline:
        opts = self.options
        flat_birth = self.birth.ravel()
        sites = np.flatnonzero(self.flat_mask)
        order = sites[np.argsort(flat_birth[sites], kind="stable")]
        next_birth = 0

        ign_rng = make_rng(self.seed, IGNITIONS)
        rate = opts.zeta * self.n_sites
        cutoff = opts.ignition_cutoff
        next_ign = ign_rng.exponential(1.0 / rate) if rate > 0 else math.inf
        if next_ign > cutoff:
            next_ign = math.inf

        t = 0.0
        while True:
            tb = flat_birth[order[next_birth]] if next_birth < order.size else math.inf
            tr = self.heap[0][0] if self.heap else math.inf
            t = min(tb, tr, next_ign)
            if t > opts.t_end or t == math.inf:
                break
            if tb == t:
                self.occupy(int(order[next_birth]), t)
                next_birth += 1
            elif tr == t:
                _, f = heapq.heappop(self.heap)
                self.rebirths += 1
                self.occupy(f, t)
            else:
                f = int(sites[ign_rng.integers(sites.size)])
                self.ign_times.append(t)
                self.ign_sites.append(f)
                if self.state[f] == OCCUPIED:
                    self.burn(f, t)
                    if opts.until_all_burnt and self.dead >= self.n_sites:
                        break
                next_ign = t + ign_rng.exponential(1.0 / rate)
                if next_ign > cutoff:
                    next_ign = math.inf

        end_time = t if opts.until_all_burnt else opts.t_end
        config = self.config
        config.birth_time = self.first_birth.reshape(self.grid.shape)
        config.burn_time = self.burn_time.reshape(self.grid.shape)
        logger.debug(
            f"Fire run seed={self.seed}: {len(self.burns)} burns, {len(self.ign_times)} ignitions, "
            f"{self.rebuilds} union-find rebuilds"
        )
        return FireTimeline(
            options=opts,
            seed=self.seed,
            birth_time=config.birth_time,
            ignition_times=np.asarray(self.ign_times, dtype=float),
            ignition_sites=np.asarray(self.ign_sites, dtype=np.int64),
            burns=self.burns,
            final=config,
            end_time=float(end_time),
            rebirths=self.rebirths,
            stats={"rebuilds": self.rebuilds, "ignitions": len(self.ign_times)},
        )


def simulate_ffwor(
    options: FireOptions,
    seed: int,
    observer: Optional[Callable[[np.ndarray, BurnEvent], None]] = None,
) -> FireTimeline:
    """
    Exact event-driven forest fire run.

    Births, recovery rebirths and ignitions are merged in time order. Births
    use the same stream as ``simulate_pure_birth``, so with ζ = 0 the final
    state is the pure birth configuration at t_end.

    Args:
        observer: Called before every burn with a copy of the state array and
            the event about to be applied
    """
    return _FireEngine(options, seed, observer).run()


# =============================================================================
# LOCAL CLUSTERS
# =============================================================================

@dataclass(frozen=True)
class LocalCluster:
    """Cluster of the origin in a fresh field, as axial offsets."""
    sites: np.ndarray
    boundary: np.ndarray
    clipped: bool

    @property
    def radius(self) -> float:
        """Largest L∞ distance from the origin over the cluster and its outer boundary; 0 for an empty cluster."""
        if self.sites.size == 0:
            return 0.0
        pts = np.concatenate([self.sites, self.boundary])
        ex = pts[:, 0] + pts[:, 1] / 2.0
        ey = pts[:, 1] * (math.sqrt(3.0) / 2.0)
        return max(1.0, float(linf(ex, ey).max()))


def sample_local_cluster(p: float, radius: float, rng: np.random.Generator) -> LocalCluster:
    """
    Occupied cluster of the origin in a Bernoulli(p) field on ball(radius).

    ``clipped`` is set when the cluster reaches the boundary of the ball, in
    which case it is truncated there.
    """
    ball = Window.ball(max(1.0, radius))
    grid, mask = window_mask(ball)
    field_ = (rng.random(grid.shape) < p) & mask
    origin = grid.index((0, 0))
    empty = np.zeros((0, 2), dtype=np.int64)
    if not field_[origin]:
        return LocalCluster(sites=empty, boundary=empty, clipped=False)
    label, _ = label_mask(field_)
    cluster = label == label[origin]
    nbrs = any_neighbor(cluster) & ~cluster & mask
    clipped = bool(np.any(cluster & cached_side_mask(ball, BoundarySide.INNER)))
    return LocalCluster(sites=grid.coords(cluster), boundary=grid.coords(nbrs), clipped=clipped)


# =============================================================================
# Y-PROCESS
# =============================================================================

@dataclass
class YResult:
    """Y_t together with the mark bookkeeping."""
    config: SiteConfig
    marks: int
    removed_clusters: int
    clipped: int


def default_y_pad(tau: float, backend: Optional[ScaleBackend] = None, cap: float = 256.0) -> float:
    """2·L(p(τ)), capped (L is infinite at t_c)."""
    backend = backend or AnalyticBackend()
    if tau == T_C:
        return cap
    try:
        return min(cap, 2.0 * backend.L(tau))
    except (OverflowError, ValueError):
        return cap


def simulate_Y(
    window: Window,
    zeta: float,
    t: float,
    seed: int,
    pad: Optional[float] = None,
    pad_cap: float = 256.0,
    backend: Optional[ScaleBackend] = None,
) -> YResult:
    """
    Y_t = X_t minus, for each ignition mark (v, τ) with τ < t, an independent
    occupied cluster of v at parameter p(τ) together with its outer boundary.

    Each cluster is sampled in a fresh field on ball(pad) around v, the pad
    defaulting to 2·L(p(τ)) capped at ``pad_cap``; clusters reaching the pad
    are counted as clipped.
    """
    if t < 0 or zeta < 0:
        raise ValueError("t and zeta must be non-negative")
    config = simulate_pure_birth(window, t, seed)
    grid = config.grid
    sites = np.flatnonzero(config.mask)
    rng = make_rng(seed, MARKS)
    n_marks = int(rng.poisson(zeta * sites.size * t)) if zeta > 0 and t > 0 else 0
    times = np.sort(rng.uniform(0.0, t, n_marks))
    chosen = sites[rng.integers(sites.size, size=n_marks)] if n_marks else np.zeros(0, dtype=np.int64)
    removed = 0
    clipped = 0
    for tau, f in zip(times, chosen):
        radius = pad if pad is not None else default_y_pad(float(tau), backend, pad_cap)
        local = sample_local_cluster(p_of_t(float(tau)), radius, rng)
        if local.sites.size == 0:
            continue
        removed += 1
        clipped += int(local.clipped)
        v = grid.site(f)
        pts = np.concatenate([local.sites, local.boundary]) + np.array([v.x, v.y])
        ix = pts[:, 0] - grid.x0
        iy = pts[:, 1] - grid.y0
        ok = (ix >= 0) & (ix < grid.width) & (iy >= 0) & (iy < grid.height)
        hit = (iy[ok], ix[ok])
        keep = config.mask[hit]
        config.state[hit[0][keep], hit[1][keep]] = VACANT
    logger.debug(f"Y-process: {n_marks} marks, {removed} clusters removed, {clipped} clipped")
    return YResult(config=config, marks=n_marks, removed_clusters=removed, clipped=clipped)


def occupied_density(config: SiteConfig) -> float:
    """Fraction of occupied sites (burnt counts as unoccupied)."""
    return config.occupied_fraction()


# =============================================================================
# INDUCED HOLE LAW
# =============================================================================

@dataclass
class RhoPiMeasurement:
    """Empirical hole probability and radius tail induced by the marks."""
    zeta: float
    eps: float
    m: float
    pi_hat: float
    pi_std_err: float
    pi_expected: float
    radii: np.ndarray
    clipped: int
    n_sites: int
    n_runs: int
    c1: float = 1.0
    c2: float = 1.0
    upsilon: float = 0.0

    def rho_hat(self, r) -> np.ndarray:
        """P̂(radius ≥ r | site marked), nonincreasing in r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.radii.size == 0:
            return np.zeros_like(r)
        sorted_radii = np.sort(self.radii)
        below = np.searchsorted(sorted_radii, r, side="left")
        return (sorted_radii.size - below) / sorted_radii.size

    def envelope(self, r) -> np.ndarray:
        """c1·r^(55/48 + υ - 2)·e^(-c2·r/m), capped at 1."""
        r = np.asarray(r, dtype=float)
        return np.minimum(1.0, self.c1 * r ** (ONE_ARM_ALPHA + self.upsilon - 2.0) * np.exp(-self.c2 * r / self.m))

    def rows(self, grid: Sequence[float]) -> List[dict]:
        rho = self.rho_hat(grid)
        env = self.envelope(np.asarray(grid, dtype=float))
        return [{"r": float(r), "rho_hat": float(a), "envelope": float(b)} for r, a, b in zip(grid, rho, env)]


def measure_rho_pi(
    zeta: float,
    eps: float,
    window: Window,
    n_runs: int,
    seed: int,
    c1: float = 1.0,
    c2: float = 1.0,
    upsilon: float = 0.0,
    m: Optional[float] = None,
    backend: Optional[ScaleBackend] = None,
    pad_scales: float = 4.0,
) -> RhoPiMeasurement:
    """
    Marks fall at rate ζ per site on [0, t_c - ε]. A site is a hole centre if
    marked at least once; its radius is the largest closed-cluster radius over
    its marks, each cluster drawn independently at p(τ).

    m defaults to L(t_c - ε) from ``backend`` (analytic by default).
    """
    if not 0 < eps < T_C:
        raise ValueError("eps must lie in (0, t_c)")
    backend = backend or AnalyticBackend()
    horizon = T_C - eps
    if m is None:
        m = backend.L(horizon)
    _, mask = window_mask(window)
    n_sites = int(mask.sum())
    marked_total = 0
    clipped = 0
    radii: List[float] = []
    for run in range(n_runs):
        rng = make_rng(seed, MARKS, run)
        counts = rng.poisson(zeta * horizon, n_sites)
        marked = np.flatnonzero(counts)
        marked_total += marked.size
        for c in counts[marked]:
            best = 0.0
            for tau in rng.uniform(0.0, horizon, int(c)):
                local = sample_local_cluster(p_of_t(float(tau)), pad_scales * m, rng)
                clipped += int(local.clipped)
                best = max(best, local.radius)
            radii.append(best)
    trials = n_sites * n_runs
    pi_hat = marked_total / trials if trials else 0.0
    return RhoPiMeasurement(
        zeta=zeta,
        eps=eps,
        m=float(m),
        pi_hat=pi_hat,
        pi_std_err=math.sqrt(pi_hat * (1 - pi_hat) / trials) if trials else 0.0,
        pi_expected=-math.expm1(-zeta * horizon),
        radii=np.asarray(radii, dtype=float),
        clipped=clipped,
        n_sites=n_sites,
        n_runs=n_runs,
        c1=c1,
        c2=c2,
        upsilon=upsilon,
    )


# =============================================================================
# BURNING PROBABILITIES
# =============================================================================

def origin_burns(timeline: FireTimeline, t_lo: float, t_hi: float) -> bool:
    """Whether the origin turned burnt during [t_lo, t_hi]."""
    f = timeline.grid.flat_index((0, 0))
    for event in timeline.burns:
        if event.time > t_hi:
            break
        if event.time >= t_lo and np.any(event.sites == f):
            return True
    return False


def _burning_event(zeta: float, region: Window, t_lo: float, t_hi: float, **fire_kwargs):
    def event(rng: np.random.Generator) -> bool:
        if zeta == 0:
            return False
        opts = FireOptions(zeta=zeta, t_end=t_hi, region=region, **fire_kwargs)
        return origin_burns(simulate_ffwor(opts, child_seed(rng)), t_lo, t_hi)

    return event


def _check_burning_window(t_lo: float, t_hi: float) -> None:
    if not T_C < t_lo:
        raise ValueError(f"Need t_lo > t_c = {T_C:.4f}, got {t_lo}")
    if not t_lo < t_hi:
        raise ValueError("Need t_lo < t_hi")


def estimate_burning_prob(
    zeta: float,
    n: float,
    t_lo: float,
    t_hi: float,
    n_runs: int,
    seed: int,
    threads: Optional[int] = None,
    **fire_kwargs,
) -> EstimateResult:
    """
    Probability that the origin burns during [t_lo, t_hi] in the box of side n.

    Extra keyword arguments (burn_boundary, recovery, stop_ignitions_at) are
    passed to ``FireOptions``.
    """
    _check_burning_window(t_lo, t_hi)
    region = Window.box(n)
    return estimate_event(
        _burning_event(zeta, region, t_lo, t_hi, **fire_kwargs),
        n_runs,
        seed,
        threads=threads,
        metadata={"zeta": zeta, "box_side": n, "t_lo": t_lo, "t_hi": t_hi},
    )


@dataclass
class BurningFamilyResult:
    """Per-radius burning estimates over boundary circuits of balls, with their range."""
    radii: List[float]
    estimates: List[EstimateResult]
    label: str = PROXY_LABEL

    @property
    def minimum(self) -> float:
        return min(e.p_hat for e in self.estimates)

    @property
    def maximum(self) -> float:
        return max(e.p_hat for e in self.estimates)

    def rows(self) -> List[dict]:
        return [
            {"radius": r, "p_hat": e.p_hat, "std_err": e.std_err, "n_samples": e.n_samples, "kind": "proxy"}
            for r, e in zip(self.radii, self.estimates)
        ]


def circuit_radii(n1: float, n2: float, count: int) -> List[float]:
    """Geometric grid of ``count`` radii from n1 to n2 (rounded, distinct)."""
    if not 0 < n1 < n2:
        raise ValueError("Need 0 < n1 < n2")
    values = np.geomspace(n1, n2, max(2, count))
    return sorted({float(round(v)) for v in values})


def estimate_burning_prob_circuits(
    zeta: float,
    n1: float,
    n2: float,
    t_lo: float,
    t_hi: float,
    n_runs: int,
    seed: int,
    count: int = 4,
    threads: Optional[int] = None,
) -> BurningFamilyResult:
    """
    Burning probability of the origin in the domain enclosed by the boundary
    circuit of ball(r), for r on a geometric grid in [n1, n2].
    """
    _check_burning_window(t_lo, t_hi)
    radii = circuit_radii(n1, n2, count)
    estimates = [
        estimate_event(
            _burning_event(zeta, Window.ball(r), t_lo, t_hi),
            n_runs,
            seed + i,
            threads=threads,
            metadata={"zeta": zeta, "radius": r, "t_lo": t_lo, "t_hi": t_hi},
        )
        for i, r in enumerate(radii)
    ]
    return BurningFamilyResult(radii=radii, estimates=estimates)
