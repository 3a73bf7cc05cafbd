"""Disjoint-set forest used for bond-configuration cluster labelling."""

from __future__ import annotations


class UnionFind:
    """Union-find with path halving and union by size.

    Elements are the integers ``0 .. n-1``.  ``labels()`` returns the root of
    every element, so two elements share a cluster exactly when their labels
    agree.
    """

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        """Merge the clusters of ``x`` and ``y``; return True if they were distinct."""
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]
        return True

    def connected(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)

    def cluster_size(self, x: int) -> int:
        return self.size[self.find(x)]

    def labels(self) -> list[int]:
        return [self.find(x) for x in range(len(self.parent))]
