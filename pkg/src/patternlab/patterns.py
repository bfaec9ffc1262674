"""Local-structure descriptors of nodes computed by color refinement.

A node's depth-d descriptor ("d-pattern") is defined recursively: at depth 0
it is the node's feature class; at depth t it is the pair of the node's own
depth-(t-1) descriptor and the multiset of its neighbors' depth-(t-1)
descriptors.  Descriptors are interned as 128-bit digests of a canonical
serialization, with every expansion retained so digest collisions are
detectable.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .graphs import Graph, Multiset

__all__ = [
    "PatternId",
    "PatternTable",
    "PatternHistogram",
    "PatternTree",
    "TreeDescriptor",
    "PatternCollisionError",
    "refine_patterns",
    "pattern_histogram",
    "tv_distance",
    "unrolled_tree",
    "pattern_tree_descriptor",
    "descriptor_matrix",
    "worst_case_set",
    "write_pattern_report",
]

# implemented as <= eps - _STRICT_SLACK to realize the strict inequality
# "train mass < eps" without float-boundary flakiness
_STRICT_SLACK = 1e-9
_MASS_GRID = 1_000_000  # knapsack rationalization: 1e-6 mass units
_DP_ITEM_LIMIT = 20  # <= 2**20 candidate subsets handled exactly


@dataclass(frozen=True, order=True)
class PatternId:
    """Interned identity of a depth-`depth` pattern (128-bit digest)."""

    depth: int
    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __repr__(self) -> str:  # short form keeps test output readable
        return f"PatternId(d={self.depth}, {self.digest.hex()[:12]})"


class PatternCollisionError(RuntimeError):
    """Two structurally different patterns produced the same digest."""


class PatternTable:
    """Expansion store: maps each PatternId back to how it was built.

    Depth-0 ids expand to a feature class; deeper ids expand to
    (parent id, multiset of neighbor ids).  Registration is idempotent and
    audits digests: registering a different expansion under an existing id
    raises PatternCollisionError.
    """

    def __init__(self) -> None:
        self._leaf: dict[PatternId, int] = {}
        self._inner: dict[PatternId, tuple[PatternId, Multiset]] = {}
        self.insertion_log: list[PatternId] = []

    def __contains__(self, pid: PatternId) -> bool:
        return pid in self._leaf or pid in self._inner

    def __len__(self) -> int:
        return len(self._leaf) + len(self._inner)

    def ids(self) -> list[PatternId]:
        return list(self._leaf) + list(self._inner)

    def feature_class(self, pid: PatternId) -> int:
        return self._leaf[pid]

    def expansion(self, pid: PatternId) -> tuple[PatternId, Multiset]:
        return self._inner[pid]

    def register_leaf(self, pid: PatternId, feature: int) -> None:
        if pid in self._leaf:
            if self._leaf[pid] != feature:
                raise PatternCollisionError(f"digest collision at depth 0: {pid}")
            return
        self._leaf[pid] = feature
        self.insertion_log.append(pid)

    def register_inner(self, pid: PatternId, parent: PatternId, children: Multiset) -> None:
        if pid in self._inner:
            if self._inner[pid] != (parent, children):
                raise PatternCollisionError(f"digest collision at depth {pid.depth}: {pid}")
            return
        self._inner[pid] = (parent, children)
        self.insertion_log.append(pid)

    def merge(self, other: "PatternTable") -> None:
        for pid, feature in other._leaf.items():
            self.register_leaf(pid, feature)
        for pid, (parent, children) in other._inner.items():
            self.register_inner(pid, parent, children)


def _leaf_id(feature: int) -> PatternId:
    h = hashlib.blake2b(digest_size=16)
    h.update(b"P0")
    h.update(int(feature).to_bytes(4, "little"))
    return PatternId(0, h.digest())


def _inner_id(depth: int, parent: PatternId, children: Multiset) -> PatternId:
    h = hashlib.blake2b(digest_size=16)
    h.update(b"PT")
    h.update(depth.to_bytes(4, "little"))
    h.update(parent.digest)
    for child, mult in children:
        h.update(child.digest)
        h.update(int(mult).to_bytes(4, "little"))
    return PatternId(depth, h.digest())


def refine_patterns(
    g: Graph, d: int, table: PatternTable | None = None
) -> tuple[list[list[PatternId]], PatternTable]:
    """Color refinement to depth d.

    Returns per-depth, per-node pattern ids (``levels[t][v]`` for t in 0..d)
    and the table of expansions.  Two nodes share ``levels[t][v]`` exactly
    when their depth-t descriptors coincide.
    """
    if d < 0:
        raise ValueError("depth must be non-negative")
    if table is None:
        table = PatternTable()
    current: list[PatternId] = []
    for v in range(g.num_nodes):
        pid = _leaf_id(g.features[v])
        table.register_leaf(pid, g.features[v])
        current.append(pid)
    levels = [current]
    for t in range(1, d + 1):
        prev = levels[-1]
        nxt: list[PatternId] = []
        cache: dict[tuple, PatternId] = {}
        for v in range(g.num_nodes):
            children = Multiset.from_iterable(prev[u] for u in g.adjacency[v])
            key = (prev[v], children.entries)
            pid = cache.get(key)
            if pid is None:
                pid = _inner_id(t, prev[v], children)
                table.register_inner(pid, prev[v], children)
                cache[key] = pid
            nxt.append(pid)
        levels.append(nxt)
    return levels, table


@dataclass(frozen=True)
class PatternHistogram:
    """Empirical distribution of depth-`depth` patterns over a node population."""

    depth: int
    mass: dict[PatternId, float]
    node_count: int

    def __post_init__(self):
        if self.mass:
            total = math.fsum(self.mass.values())
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"masses sum to {total}, not 1")
        for pid, p in self.mass.items():
            if pid.depth != self.depth:
                raise ValueError("histogram contains an id of the wrong depth")
            if p < 0:
                raise ValueError("negative mass")

    def __call__(self, pid: PatternId) -> float:
        return self.mass.get(pid, 0.0)

    def mass_of(self, subset: Iterable[PatternId]) -> float:
        return math.fsum(self.mass.get(pid, 0.0) for pid in subset)


def pattern_histogram(
    graphs: Sequence[Graph], d: int, table: PatternTable | None = None
) -> PatternHistogram:
    """Empirical distribution of depth-d patterns over all nodes of all graphs."""
    if not graphs:
        raise ValueError("need at least one graph")
    classes = {g.num_classes for g in graphs}
    if len(classes) != 1:
        raise ValueError("graphs must share num_classes")
    counts: dict[PatternId, int] = {}
    total = 0
    for g in graphs:
        levels, table = refine_patterns(g, d, table)
        for pid in levels[d]:
            counts[pid] = counts.get(pid, 0) + 1
            total += 1
    if total == 0:
        raise ValueError("graphs contain no nodes")
    return PatternHistogram(d, {p: c / total for p, c in counts.items()}, total)


def tv_distance(h1: PatternHistogram, h2: PatternHistogram) -> float:
    """Total-variation distance: half the L1 difference over the union support."""
    if h1.depth != h2.depth:
        raise ValueError("histograms have different depths")
    support = set(h1.mass) | set(h2.mass)
    return 0.5 * math.fsum(abs(h1(p) - h2(p)) for p in support)


@dataclass(frozen=True)
class PatternTree:
    """Unrolled neighborhood tree; layer k holds one node per length-k walk.

    ``nodes[i] = (depth, origin, feature, parent)`` with ``parent`` an index
    into ``nodes`` (None at the root).  ``layer_offsets[k]`` is the start of
    layer k; a sentinel end offset closes the last layer.
    """

    depth: int
    nodes: tuple[tuple[int, int, int, int | None], ...]
    layer_offsets: tuple[int, ...]

    def layer(self, k: int) -> tuple[tuple[int, int, int, int | None], ...]:
        return self.nodes[self.layer_offsets[k] : self.layer_offsets[k + 1]]

    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(
            self.layer_offsets[k + 1] - self.layer_offsets[k] for k in range(self.depth + 1)
        )


def unrolled_tree(g: Graph, v: int, d: int) -> PatternTree:
    """Explicitly materialize the depth-d unrolled tree rooted at v.

    Children of a tree node are all graph neighbors of its origin, including
    the one leading back toward the root, so layer sizes grow like walk
    counts; intended for small d.
    """
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range")
    if d < 0:
        raise ValueError("depth must be non-negative")
    nodes: list[tuple[int, int, int, int | None]] = [(0, v, g.features[v], None)]
    offsets = [0]
    frontier = [0]
    for depth in range(1, d + 1):
        offsets.append(len(nodes))
        nxt: list[int] = []
        for idx in frontier:
            origin = nodes[idx][1]
            for u in g.adjacency[origin]:
                nxt.append(len(nodes))
                nodes.append((depth, u, g.features[u], idx))
        frontier = nxt
    offsets.append(len(nodes))
    return PatternTree(d, tuple(nodes), tuple(offsets))


@dataclass(frozen=True)
class TreeDescriptor:
    """Per-layer, per-feature-class node counts of an unrolled tree."""

    counts: np.ndarray  # (depth+1, num_classes) int64

    def __post_init__(self):
        if self.counts.ndim != 2:
            raise ValueError("counts must be a (depth+1, num_classes) matrix")

    @property
    def depth(self) -> int:
        return self.counts.shape[0] - 1

    def flatten(self) -> np.ndarray:
        return self.counts.reshape(-1)

    def __eq__(self, other) -> bool:
        return isinstance(other, TreeDescriptor) and np.array_equal(self.counts, other.counts)


def descriptor_matrix(g: Graph, d: int) -> np.ndarray:
    """(num_nodes, d+1, num_classes) array of per-layer class counts for all nodes.

    Layer-k tree nodes correspond to length-k walks, so counts come from
    powers of the adjacency matrix applied to class indicators; all values
    are exact integers.
    """
    if d < 0:
        raise ValueError("depth must be non-negative")
    n, c = g.num_nodes, g.num_classes
    onehot = np.zeros((n, c), dtype=np.int64)
    if n:
        onehot[np.arange(n), np.array(g.features, dtype=np.int64)] = 1
    adj = g.dense_adjacency.astype(np.int64)
    out = np.zeros((n, d + 1, c), dtype=np.int64)
    walks = np.eye(n, dtype=np.int64)
    out[:, 0, :] = onehot
    for k in range(1, d + 1):
        walks = walks @ adj
        out[:, k, :] = walks @ onehot
    return out


def pattern_tree_descriptor(g: Graph, v: int, d: int) -> TreeDescriptor:
    """Class counts per layer of the depth-d unrolled tree rooted at v."""
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range")
    if d < 0:
        raise ValueError("depth must be non-negative")
    onehot = np.zeros((g.num_nodes, g.num_classes), dtype=np.int64)
    onehot[np.arange(g.num_nodes), np.array(g.features, dtype=np.int64)] = 1
    adj = g.dense_adjacency.astype(np.int64)
    counts = np.zeros((d + 1, g.num_classes), dtype=np.int64)
    walk = np.zeros(g.num_nodes, dtype=np.int64)
    walk[v] = 1
    counts[0] = walk @ onehot
    for k in range(1, d + 1):
        walk = walk @ adj
        counts[k] = walk @ onehot
    return TreeDescriptor(counts)


def count_tree_descriptor(tree: PatternTree, num_classes: int) -> TreeDescriptor:
    """Descriptor by explicit enumeration of a materialized tree (oracle path)."""
    counts = np.zeros((tree.depth + 1, num_classes), dtype=np.int64)
    for depth, _origin, feature, _parent in tree.nodes:
        counts[depth, feature] += 1
    return TreeDescriptor(counts)


def worst_case_set(
    h_train: PatternHistogram, h_test: PatternHistogram, eps: float
) -> tuple[frozenset[PatternId], float]:
    """Largest test mass capturable by a pattern set with train mass below eps.

    Patterns unseen in training always join the set (they cost nothing).  The
    remaining selection is a 0/1 knapsack over train masses rationalized to a
    1e-6 grid, solved exactly when at most 2**20 candidate subsets exist and
    greedily by test/train mass ratio otherwise.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if eps > 1:
        raise ValueError("eps must be at most 1")
    if h_train.depth != h_test.depth:
        raise ValueError("histograms have different depths")
    support = sorted(set(h_train.mass) | set(h_test.mass))
    budget = eps - _STRICT_SLACK
    chosen: set[PatternId] = set()
    items: list[tuple[PatternId, float, float]] = []
    for pid in support:
        w = h_train(pid)
        if w <= 0.0:
            chosen.add(pid)  # free: no train mass
        else:
            items.append((pid, w, h_test(pid)))
    cap = int(math.floor(budget * _MASS_GRID + 1e-12))
    weights = [int(round(w * _MASS_GRID)) for _, w, _ in items]
    zero_weight = [i for i, w in enumerate(weights) if w == 0]
    for i in zero_weight:
        chosen.add(items[i][0])  # below grid resolution: effectively free
    real_items = [(i, weights[i], items[i][2]) for i in range(len(items)) if weights[i] > 0]
    if cap >= 0 and real_items:
        if len(real_items) <= _DP_ITEM_LIMIT:
            picked = _knapsack_exact(real_items, cap)
        else:
            picked = _knapsack_greedy(real_items, cap)
        for i in picked:
            chosen.add(items[i][0])
    delta = h_test.mass_of(chosen)
    return frozenset(chosen), delta


def _knapsack_exact(items: list[tuple[int, int, float]], cap: int) -> list[int]:
    """0/1 knapsack maximizing value; items are (index, weight>0, value).

    ``best[c]`` is the optimum within capacity c, which is monotone in c, so
    the answer sits at ``best[cap]`` and items are recovered by walking the
    per-item improvement flags backwards.
    """
    cap = min(cap, sum(w for _, w, _ in items))
    best = np.zeros(cap + 1)
    take = np.zeros((len(items), cap + 1), dtype=bool)
    for row, (_idx, w, val) in enumerate(items):
        if w > cap:
            continue
        shifted = best[: cap + 1 - w] + val
        improved = shifted > best[w:] + 1e-18
        take[row, w:] = improved
        best[w:] = np.where(improved, shifted, best[w:])
    picked: list[int] = []
    c = cap
    for row in range(len(items) - 1, -1, -1):
        if take[row, c]:
            picked.append(items[row][0])
            c -= items[row][1]
    return picked


def _knapsack_greedy(items: list[tuple[int, int, float]], cap: int) -> list[int]:
    order = sorted(items, key=lambda it: (-(it[2] / it[1]), it[1]))
    picked: list[int] = []
    used = 0
    for idx, w, _val in order:
        if used + w <= cap:
            picked.append(idx)
            used += w
    return picked


def write_pattern_report(
    path, h_train: PatternHistogram, h_test: PatternHistogram
) -> float:
    """CSV of (depth, pattern_digest_hex, train_mass, test_mass) plus a TV comment row."""
    tv = tv_distance(h_train, h_test)
    support = sorted(set(h_train.mass) | set(h_test.mass))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("depth,pattern_digest_hex,train_mass,test_mass\n")
        for pid in support:
            fh.write(f"{pid.depth},{pid.hex},{h_train(pid):.17g},{h_test(pid):.17g}\n")
        fh.write(f"# tv_distance,{tv:.17g}\n")
    return tv
