"""Shared test helpers: independent oracles and a small-graph catalog."""
from __future__ import annotations

import itertools
from collections import Counter

import numpy as np
import pytest

from patternlab.graphs import Graph, new_graph
from patternlab.rng import RngStream


def oracle_patterns(g: Graph, d: int) -> list:
    """Direct recursion on nested tuples with explicit multiset comparison.

    Depth-0 descriptor is the feature class; depth-t is (own depth-(t-1)
    descriptor, sorted (descriptor, multiplicity) pairs over neighbors).
    Completely independent of the digest-based refinement path.
    """
    current = [("c", c) for c in g.features]
    for _ in range(d):
        nxt = []
        for v in range(g.num_nodes):
            counts = Counter(current[u] for u in g.adjacency[v])
            nxt.append((current[v], tuple(sorted(counts.items()))))
        current = nxt
    return current


def partition_of(keys) -> set[frozenset[int]]:
    groups: dict = {}
    for v, key in enumerate(keys):
        groups.setdefault(key, set()).add(v)
    return {frozenset(s) for s in groups.values()}


def all_graphs_up_to_iso(n: int) -> list[tuple[tuple[int, int], ...]]:
    """Edge lists of every unlabeled simple graph on n nodes, one per iso class.

    Canonical form: the lexicographically smallest edge bitmask over all node
    permutations, computed with a vectorized permutation table.
    """
    pairs = list(itertools.combinations(range(n), 2))
    pair_index = {p: i for i, p in enumerate(pairs)}
    perms = list(itertools.permutations(range(n)))
    # perm_maps[k][i] = index of pair i after applying permutation k
    perm_maps = np.array(
        [
            [pair_index[tuple(sorted((perm[a], perm[b])))] for (a, b) in pairs]
            for perm in perms
        ],
        dtype=np.int64,
    )
    n_pairs = len(pairs)
    masks = np.arange(2**n_pairs, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n_pairs)[None, :]) & 1  # (masks, pairs)
    weights = 1 << np.arange(n_pairs, dtype=np.int64)
    canon = np.full(len(masks), np.iinfo(np.int64).max, dtype=np.int64)
    for pm in perm_maps:
        permuted = bits[:, pm] @ weights
        np.minimum(canon, permuted, out=canon)
    reps = np.unique(canon)
    out = []
    for mask in reps.tolist():
        out.append(tuple(p for i, p in enumerate(pairs) if (mask >> i) & 1))
    return out


def graph_catalog(max_n: int = 6, feature_rng_seed: int = 1234):
    """(graph, description) pairs: every structure up to iso at each n,
    with exhaustive 2-class features for n <= 4 and sampled features above."""
    gen = RngStream(feature_rng_seed).generator()
    for n in range(1, max_n + 1):
        for edges in all_graphs_up_to_iso(n):
            if n <= 4:
                feature_choices = list(itertools.product(range(2), repeat=n))
            else:
                feature_choices = [tuple(int(x) for x in gen.integers(0, 2, size=n)) for _ in range(8)]
            for feats in feature_choices:
                yield new_graph(n, edges, list(feats), 2), f"n={n} edges={edges} feats={feats}"


def spearman(xs, ys) -> float:
    """Spearman rank correlation (average ranks on ties)."""

    def ranks(vals):
        order = sorted(range(len(vals)), key=lambda i: vals[i])
        r = [0.0] * len(vals)
        i = 0
        while i < len(order):
            j = i
            while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
                j += 1
            avg = (i + j) / 2.0
            for k in range(i, j + 1):
                r[order[k]] = avg
            i = j + 1
        return r

    rx, ry = np.array(ranks(list(xs))), np.array(ranks(list(ys)))
    sx, sy = rx - rx.mean(), ry - ry.mean()
    denom = np.sqrt((sx**2).sum() * (sy**2).sum())
    return float((sx * sy).sum() / denom) if denom else 0.0


def grad_close(analytic, numeric, rtol=1e-5, atol=1e-7) -> bool:
    """Coordinate-wise |a-b| <= rtol*max(|a|,|b|) + atol, the usual gradcheck form."""
    for a, b in zip(analytic, numeric):
        bound = rtol * np.maximum(np.abs(a), np.abs(b)) + atol
        if np.any(np.abs(a - b) > bound):
            return False
    return True


@pytest.fixture
def rng():
    return RngStream(20240811)
