"""
Frozen percolation with freezing threshold N.

Sites wake up at independent uniform times in [0, 1] in increasing order.
A waking site becomes occupied unless one of its neighbours already belongs
to a frozen cluster (size at least N); frozen clusters never grow again.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from nearcrit.forestfire import neighbor_table
from nearcrit.lattice import SiteCoord, Window, window_mask
from nearcrit.percolation import OCCUPIED, SiteConfig
from nearcrit.services.seeding import BIRTHS, make_rng
from nearcrit.services.unionfind import UnionFind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MergeRecord:
    """One occupation: the component sizes it joined and the resulting size."""
    time: float
    site: SiteCoord
    parts: Tuple[int, ...]
    size: int
    froze: bool


@dataclass
class FrozenResult:
    config: SiteConfig
    threshold: Optional[int]
    merges: List[MergeRecord] = field(default_factory=list)
    blocked: int = 0

    def frozen_sizes(self) -> List[int]:
        return sorted(m.size for m in self.merges if m.froze)

    def max_cluster_size(self) -> int:
        return max((m.size for m in self.merges), default=0)

    @property
    def size_cap(self) -> Optional[int]:
        """6(N-1)+1, the largest size a single merge can produce."""
        return None if self.threshold is None else 6 * (self.threshold - 1) + 1

    def merge_rows(self) -> List[dict]:
        return [
            {
                "time": m.time,
                "x": m.site.x,
                "y": m.site.y,
                "parts": " ".join(str(p) for p in m.parts),
                "size": m.size,
                "froze": int(m.froze),
            }
            for m in self.merges
        ]


def simulate_frozen(window: Window, threshold: Optional[int], seed: int) -> FrozenResult:
    """
    Run frozen percolation on ``window``.

    ``threshold`` None means N = ∞: every site occupies and the final state
    is full occupation.

    Raises:
        ValueError: if ``threshold`` is below 1
    """
    if threshold is not None and threshold < 1:
        raise ValueError("threshold must be at least 1")
    grid, mask = window_mask(window)
    wake = make_rng(seed, BIRTHS).random(grid.shape)
    config = SiteConfig.empty(window)
    state = config.state.reshape(-1)
    nbrs = neighbor_table(grid, mask)
    uf = UnionFind(grid.size)
    frozen_roots = set()
    result = FrozenResult(config=config, threshold=threshold)
    birth = np.full(grid.size, np.nan)

    flat_wake = wake.ravel()
    sites = np.flatnonzero(mask.ravel())
    for f in sites[np.argsort(flat_wake[sites], kind="stable")]:
        f = int(f)
        roots = {uf.find(j) for j in nbrs[f] if j >= 0 and state[j] == OCCUPIED}
        if threshold is not None and any(r in frozen_roots for r in roots):
            result.blocked += 1
            continue
        parts = tuple(sorted((int(uf.size[r]) for r in roots), reverse=True))
        uf.add(f)
        state[f] = OCCUPIED
        birth[f] = flat_wake[f]
        for j in nbrs[f]:
            if j >= 0 and state[j] == OCCUPIED:
                uf.union(f, j)
        root = uf.find(f)
        size = int(uf.size[root])
        froze = threshold is not None and size >= threshold
        if froze:
            frozen_roots.add(root)
        result.merges.append(
            MergeRecord(time=float(flat_wake[f]), site=grid.site(f), parts=parts, size=size, froze=froze)
        )
    config.birth_time = birth.reshape(grid.shape)
    logger.debug(
        f"Frozen percolation N={threshold}: {len(result.frozen_sizes())} frozen clusters, {result.blocked} blocked sites"
    )
    return result
