"""
Arm events in annuli.

An arm is a monochromatic path of the annulus from its inner contact set
(sites next to the inner ball) to its outer contact set (sites next to the
complement of the outer ball). A colour sequence σ holds when there are
|σ| disjoint arms whose colours read σ counter-clockwise.

Monochromatic σ = c^k reduces to k vertex-disjoint c-paths (max flow).
Otherwise the annulus is cut into pieces: an occupied piece is a component of
the annulus minus every vacant crossing cluster that contains an occupied
crossing cluster, and symmetrically for vacant pieces. Pieces of the two
colours alternate around the annulus; each contributes as many arms as fit
disjointly inside it (only needed when σ repeats a colour cyclically), and σ
holds iff it is a cyclic subsequence of the resulting colour word.
"""
import logging
import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import networkx as nx
import numpy as np

from nearcrit.lattice import FORWARD_OFFSETS, AnnulusGeometry, Window, shift
from nearcrit.percolation import Color, SiteConfig, _annulus_on, connected_sets, label_mask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArmSpec:
    """Colour sequence of an arm event, read counter-clockwise."""
    sigma: Tuple[Color, ...]

    def __post_init__(self) -> None:
        if len(self.sigma) < 1:
            raise ValueError("An arm event needs at least one arm")

    @classmethod
    def parse(cls, text: str) -> "ArmSpec":
        """
        Accepts a word over {o, v} ("ovov", "o v o v", "o,v") or the alternating
        shorthand "A4" / "4".
        """
        raw = str(text).strip()
        short = re.fullmatch(r"[Aa]?(\d+)", raw)
        if short:
            return cls.alternating(int(short.group(1)))
        letters = re.sub(r"[\s,()]", "", raw).lower()
        if not letters or set(letters) - {"o", "v"}:
            raise ValueError(f"Invalid arm sequence: {text}")
        return cls(tuple(Color.parse(c) for c in letters))

    @classmethod
    def alternating(cls, k: int) -> "ArmSpec":
        if k < 1:
            raise ValueError("An arm event needs at least one arm")
        return cls(tuple(Color.OCCUPIED if i % 2 == 0 else Color.VACANT for i in range(k)))

    @property
    def k(self) -> int:
        return len(self.sigma)

    @property
    def word(self) -> str:
        return "".join(c.value for c in self.sigma)

    def count(self, color: Color) -> int:
        return sum(1 for c in self.sigma if c == color)

    @property
    def is_monochromatic(self) -> bool:
        return len(set(self.sigma)) == 1

    @property
    def has_adjacent_repeat(self) -> bool:
        """Some colour is cyclically followed by itself."""
        k = self.k
        return k > 1 and any(self.sigma[i] == self.sigma[(i + 1) % k] for i in range(k))

    def __str__(self) -> str:
        return self.word


def max_disjoint_paths(allowed: np.ndarray, sources: np.ndarray, targets: np.ndarray, cap: int) -> int:
    """
    Maximum number of vertex-disjoint lattice paths within ``allowed`` from
    ``sources`` to ``targets`` (node-split max flow), truncated at ``cap``.
    """
    starts = allowed & sources
    ends = allowed & targets
    if cap <= 0 or not starts.any() or not ends.any():
        return 0
    h, w = allowed.shape
    graph = nx.DiGraph()
    flat = np.flatnonzero(allowed)
    for i in flat:
        graph.add_edge(("in", int(i)), ("out", int(i)), capacity=1)
    for dx, dy in FORWARD_OFFSETS:
        pair = allowed & shift(allowed, dx, dy, False)
        for i in np.flatnonzero(pair):
            j = int(i) + dy * w + dx
            graph.add_edge(("out", int(i)), ("in", j), capacity=1)
            graph.add_edge(("out", j), ("in", int(i)), capacity=1)
    for i in np.flatnonzero(starts):
        graph.add_edge("source", ("in", int(i)), capacity=1)
    for i in np.flatnonzero(ends):
        graph.add_edge(("out", int(i)), "sink", capacity=1)
    # a super-source of capacity ``cap`` truncates the flow
    graph.add_edge("root", "source", capacity=cap)
    return int(nx.maximum_flow_value(graph, "root", "sink"))


def crossing_union(colored: np.ndarray, geometry: AnnulusGeometry) -> np.ndarray:
    """Sites of ``colored`` clusters touching both contact sets of the annulus."""
    label, count = label_mask(colored)
    if count == 0:
        return np.zeros(colored.shape, dtype=bool)
    inner = np.unique(label[geometry.inner_contact & colored])
    outer = np.unique(label[geometry.outer_contact & colored])
    both = np.intersect1d(inner[inner > 0], outer[outer > 0])
    return np.isin(label, both)


def _pieces(
    geometry: AnnulusGeometry,
    cross: np.ndarray,
    other_cross: np.ndarray,
    colored: np.ndarray,
    color: Color,
    spec: ArmSpec,
) -> List[Tuple[float, int, Color, int]]:
    """(angle, tie-break index, colour, capacity) of every piece of one colour."""
    region = geometry.mask & ~other_cross
    label, _ = label_mask(region)
    ids = np.unique(label[cross])
    out = []
    cap = spec.count(color)
    for piece in ids[ids > 0]:
        inside = label == piece
        anchor = np.flatnonzero(inside & cross & geometry.inner_contact)
        first = int(anchor[0])
        angle = float(geometry.angle.ravel()[first])
        if spec.has_adjacent_repeat and cap > 1:
            capacity = max_disjoint_paths(colored & inside, geometry.inner_contact, geometry.outer_contact, cap)
        else:
            capacity = 1
        out.append((angle, first, color, capacity))
    return out


def is_cyclic_subsequence(sigma: Sequence, word: Sequence) -> bool:
    """Whether ``sigma`` embeds in order into one lap of the cyclic ``word``."""
    n = len(word)
    if len(sigma) > n:
        return False
    for start in range(n):
        i = 0
        for step in range(n):
            if word[(start + step) % n] == sigma[i]:
                i += 1
                if i == len(sigma):
                    return True
    return False


def detect_arm_event(config: SiteConfig, annulus: Window, spec: ArmSpec) -> bool:
    """
    Whether ``spec`` arms cross ``annulus`` in ``config``.

    Raises:
        WindowError: if the annulus is degenerate or not inside the configuration
    """
    geometry = _annulus_on(config, annulus)
    occupied = config.color_mask(Color.OCCUPIED) & geometry.mask
    vacant = config.color_mask(Color.VACANT) & geometry.mask

    if spec.is_monochromatic:
        colored = occupied if spec.sigma[0] == Color.OCCUPIED else vacant
        if spec.k == 1:
            return connected_sets(colored, geometry.inner_contact, geometry.outer_contact)
        cross = crossing_union(colored, geometry)
        return max_disjoint_paths(cross, geometry.inner_contact, geometry.outer_contact, spec.k) >= spec.k

    o_cross = crossing_union(occupied, geometry)
    v_cross = crossing_union(vacant, geometry)
    if not o_cross.any() or not v_cross.any():
        return False
    pieces = _pieces(geometry, o_cross, v_cross, occupied, Color.OCCUPIED, spec)
    pieces += _pieces(geometry, v_cross, o_cross, vacant, Color.VACANT, spec)
    pieces.sort(key=lambda piece: (piece[0], piece[1]))
    word = [color for _, _, color, capacity in pieces for _ in range(capacity)]
    return is_cyclic_subsequence(spec.sigma, word)
