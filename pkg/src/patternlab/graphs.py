"""Immutable undirected graphs with categorical node features, plus seeded generators."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .rng import RngStream

__all__ = [
    "Graph",
    "Multiset",
    "new_graph",
    "degree",
    "gen_er",
    "gen_pa",
    "gen_geometric",
    "disjoint_union",
]


@dataclass(frozen=True)
class Multiset:
    """Sorted (element, multiplicity) pairs with strictly increasing elements."""

    entries: tuple[tuple, ...]

    def __post_init__(self):
        for (a, m), (b, _) in zip(self.entries, self.entries[1:]):
            if not a < b:
                raise ValueError("multiset elements must be strictly increasing")
        if any(m < 1 for _, m in self.entries):
            raise ValueError("multiplicities must be positive")

    @classmethod
    def from_iterable(cls, items: Iterable) -> "Multiset":
        counts: dict = {}
        for item in items:
            counts[item] = counts.get(item, 0) + 1
        return cls(tuple(sorted(counts.items())))

    def total(self) -> int:
        return sum(m for _, m in self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph; ``features[v]`` is a class index < ``num_classes``.

    Instances are immutable and safe to share across threads.  Derived views
    (dense adjacency, degree vector) are cached on first use.
    """

    num_nodes: int
    adjacency: tuple[tuple[int, ...], ...]
    features: tuple[int, ...]
    num_classes: int

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(nbrs) for nbrs in self.adjacency], dtype=np.int64)

    @cached_property
    def num_edges(self) -> int:
        return int(self.degrees.sum()) // 2

    @cached_property
    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        for v, nbrs in enumerate(self.adjacency):
            a[v, list(nbrs)] = 1.0
        return a

    def onehot_features(self, width: int) -> np.ndarray:
        """Cached one-hot feature rows zero-padded to ``width`` (do not mutate)."""
        cache = self.__dict__.setdefault("_onehot_cache", {})
        if width not in cache:
            h = np.zeros((self.num_nodes, width))
            if self.num_nodes:
                h[np.arange(self.num_nodes), list(self.features)] = 1.0
            cache[width] = h
        return cache[width]

    @cached_property
    def edge_list(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (u, v) for u in range(self.num_nodes) for v in self.adjacency[u] if u < v
        )

    def validate(self) -> None:
        """Check structural invariants; raises ValueError on violation."""
        if len(self.adjacency) != self.num_nodes or len(self.features) != self.num_nodes:
            raise ValueError("adjacency/features length must equal num_nodes")
        for v, nbrs in enumerate(self.adjacency):
            if any(u == v for u in nbrs):
                raise ValueError(f"self-loop at node {v}")
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"adjacency of node {v} not sorted/deduplicated")
            for u in nbrs:
                if not 0 <= u < self.num_nodes:
                    raise ValueError(f"neighbor {u} out of range")
                if v not in self.adjacency[u]:
                    raise ValueError(f"asymmetric edge ({v},{u})")
        for v, c in enumerate(self.features):
            if not 0 <= c < self.num_classes:
                raise ValueError(f"feature class {c} of node {v} out of range")


def new_graph(
    n: int,
    edges: Iterable[tuple[int, int]],
    features: Sequence[int] | None = None,
    num_classes: int = 1,
) -> Graph:
    """Build a graph from an edge list; duplicates collapse, orientation is ignored."""
    if n < 0:
        raise ValueError("node count must be non-negative")
    if features is None:
        features = [0] * n
    if len(features) != n:
        raise ValueError("features must have one entry per node")
    for c in features:
        if not 0 <= c < num_classes:
            raise ValueError(f"feature index {c} out of range for {num_classes} classes")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge endpoint out of range: ({u},{v})")
        if u == v:
            raise ValueError(f"self-loop not allowed: ({u},{v})")
        nbrs[u].add(v)
        nbrs[v].add(u)
    return Graph(
        num_nodes=n,
        adjacency=tuple(tuple(sorted(s)) for s in nbrs),
        features=tuple(int(c) for c in features),
        num_classes=num_classes,
    )


def degree(g: Graph, v: int) -> int:
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range")
    return len(g.adjacency[v])


def gen_er(n: int, p: float, rng: RngStream) -> Graph:
    """Erdos-Renyi G(n, p): each unordered pair is an edge independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    gen = rng.generator()
    iu, iv = np.triu_indices(n, k=1)
    mask = gen.random(len(iu)) < p
    edges = list(zip(iu[mask].tolist(), iv[mask].tolist()))
    return new_graph(n, edges)


def gen_pa(n: int, m: int, rng: RngStream) -> Graph:
    """Preferential attachment: nodes arrive one at a time and attach to exactly
    ``m`` distinct existing nodes chosen proportionally to current degree.

    The seed component is an (m+1)-clique so the first arrival has m valid
    targets.  Targets are drawn sequentially with re-sampling on collision;
    degrees update only after a node has attached all its m edges.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if n <= m:
        raise ValueError("n must exceed m")
    gen = rng.generator()
    edges: list[tuple[int, int]] = []
    # endpoint pool holds one entry per degree unit, so uniform draws from it
    # are degree-proportional draws over nodes
    pool: list[int] = []
    seed_size = m + 1
    for u in range(seed_size):
        for v in range(u + 1, seed_size):
            edges.append((u, v))
        pool.extend([u] * m)
    for v in range(seed_size, n):
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(pool[int(gen.integers(0, len(pool)))])
        for u in sorted(chosen):
            edges.append((u, v))
        pool.extend(sorted(chosen))
        pool.extend([v] * m)
    return new_graph(n, edges)


def gen_geometric(
    n: int, rho: float, rng: RngStream, return_points: bool = False
) -> Graph | tuple[Graph, np.ndarray]:
    """Random geometric graph: n points uniform in the unit square, edge iff
    Euclidean distance < rho."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    gen = rng.generator()
    pts = gen.random((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    iu, iv = np.triu_indices(n, k=1)
    mask = dist[iu, iv] < rho
    g = new_graph(n, list(zip(iu[mask].tolist(), iv[mask].tolist())))
    if return_points:
        return g, pts
    return g


def disjoint_union(a: Graph, b: Graph) -> Graph:
    """Disjoint union with b's node indices shifted past a's."""
    if a.num_classes != b.num_classes:
        raise ValueError("graphs must share num_classes")
    off = a.num_nodes
    edges = list(a.edge_list) + [(u + off, v + off) for u, v in b.edge_list]
    return new_graph(
        a.num_nodes + b.num_nodes,
        edges,
        list(a.features) + list(b.features),
        a.num_classes,
    )
