"""Disjoint-set forest over integer site indices."""
import numpy as np


class UnionFind:
    """
    Union by size with path halving, over the integers ``0 .. n-1``.

    Nodes are inactive until ``add`` is called. ``reset`` turns a node back into
    a singleton, which is how dynamic processes reuse the index of a site that
    has been removed and later re-enters.
    """

    def __init__(self, n: int) -> None:
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.zeros(n, dtype=np.int64)
        self.active = np.zeros(n, dtype=bool)

    def add(self, x: int) -> None:
        """Activate ``x`` as a singleton set."""
        self.parent[x] = x
        self.size[x] = 1
        self.active[x] = True

    reset = add

    def remove(self, x: int) -> None:
        """Deactivate ``x``; its parent pointer is left for lazy cleanup."""
        self.active[x] = False

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return int(x)

    def union(self, x: int, y: int) -> int:
        """
        Merge the sets of ``x`` and ``y``.

        Returns:
            The root of the merged set
        """
        rx = self.find(x)
        ry = self.find(y)
        if rx == ry:
            return rx
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        return rx

    def set_size(self, x: int) -> int:
        return int(self.size[self.find(x)])

    def connected(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)

    def rebuild(self, labels: np.ndarray) -> None:
        """
        Replace the forest by a flat one given component labels.

        Args:
            labels: For every node, a component id > 0, or 0 for inactive nodes
        """
        flat = np.asarray(labels).ravel()
        n = self.parent.size
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.zeros(n, dtype=np.int64)
        self.active = flat > 0
        if not self.active.any():
            return
        idx = np.flatnonzero(self.active)
        comp = flat[idx]
        # first node of each component becomes its root
        order = np.lexsort((idx, comp))
        comp_sorted = comp[order]
        idx_sorted = idx[order]
        starts = np.flatnonzero(np.r_[True, comp_sorted[1:] != comp_sorted[:-1]])
        counts = np.diff(np.r_[starts, comp_sorted.size])
        roots = np.repeat(idx_sorted[starts], counts)
        self.parent[idx_sorted] = roots
        self.size[idx_sorted[starts]] = counts
