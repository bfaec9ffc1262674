"""Fast self-checks behind `patternlab verify`.

Each check re-derives a contract from an independent path (brute-force
recursion, finite differences, closed forms) and prints one PASS/FAIL line.
The full test suite covers the same ground more thoroughly; this is the
30-second field version.
"""
from __future__ import annotations

import numpy as np

from .constructions import (
    build_integer_memorizer,
    build_pattern_memorizer,
    check_pattern_coverage,
    evaluate_integer_memorizer,
    min_norm_solution,
    pattern_spec_from_graphs,
)
from .gnn import build_student, evaluate_loss, gnn_forward, gnn_loss_and_grad, param_arrays
from .graphs import gen_er, new_graph
from .neural import finite_diff_grad
from .patterns import refine_patterns
from .rng import RngStream


def _oracle_patterns(g, d):
    levels = [[("c", c) for c in g.features]]
    for _ in range(d):
        prev = levels[-1]
        levels.append(
            [
                (prev[v], tuple(sorted((prev[u] for u in g.adjacency[v]))))
                for v in range(g.num_nodes)
            ]
        )
    return levels[d]


def check_refinement() -> bool:
    for i in range(20):
        g = gen_er(9, 0.35, RngStream(900 + i))
        ids, _ = refine_patterns(g, 3)
        oracle = _oracle_patterns(g, 3)
        groups_fast = {}
        groups_oracle = {}
        for v in range(g.num_nodes):
            groups_fast.setdefault(ids[3][v], set()).add(v)
            groups_oracle.setdefault(oracle[v], set()).add(v)
        if sorted(map(sorted, groups_fast.values())) != sorted(map(sorted, groups_oracle.values())):
            return False
    return True


def check_integer_memorizer() -> bool:
    gen = np.random.default_rng(4)
    for _ in range(20):
        n = int(gen.integers(1, 30))
        ys = gen.uniform(-1, 1, size=n)
        w = build_integer_memorizer(n, ys)
        for k in range(1, n + 1):
            if abs(evaluate_integer_memorizer(w, k) - ys[k - 1]) > 1e-9:
                return False
    return True


def check_pattern_memorizer() -> bool:
    gen = np.random.default_rng(5)
    graphs = [gen_er(12, 0.3, RngStream(950 + i)) for i in range(4)]
    spec = pattern_spec_from_graphs(graphs, 2, lambda pid, t: float(gen.uniform(-1, 1)), 12)
    model = build_pattern_memorizer(spec)
    for g in graphs:
        ids = check_pattern_coverage(spec, g)
        out = gnn_forward(model, g).reshape(-1)
        want = np.array([spec.targets[p] for p in ids])
        if not np.allclose(out, want, atol=1e-6):
            return False
    return True


def check_gradients() -> bool:
    g = gen_er(8, 0.4, RngStream(990))
    for readout, target in (("sum", np.array([0.7])), ("none", np.linspace(0, 1, 8)[:, None])):
        model = build_student(1, 4, 2, 1, RngStream(991), readout, "tanh")
        _, grads = gnn_loss_and_grad(model, [(g, target)], "main", "mse")
        arrays = param_arrays(model)
        fd = finite_diff_grad(lambda _: evaluate_loss(model, [(g, target)]), arrays, 1e-6)
        for a, b in zip(grads, fd):
            if np.max(np.abs(a - b)) > 1e-5 * max(1.0, np.max(np.abs(b))):
                return False
    return True


def check_min_norm() -> bool:
    for n, m in ((10, 15), (10, 3), (7, 5), (9, 4)):
        w1, w2, b = min_norm_solution(n, m, "l1")
        is_general = abs(w1 + b) < 1e-12 and abs(w2 - 0.5) < 1e-12
        if is_general != (2 * m > n):
            return False
    return True


def check_theorem_consistency() -> bool:
    """Equal depth-2 ids must give equal node outputs for a random network."""
    g = gen_er(20, 0.3, RngStream(992))
    model = build_student(1, 6, 2, 1, RngStream(993), "none", "relu")
    out = gnn_forward(model, g).reshape(-1)
    ids, _ = refine_patterns(g, 2)
    by_pattern: dict = {}
    for v, pid in enumerate(ids[2]):
        by_pattern.setdefault(pid, []).append(out[v])
    return all(max(vals) - min(vals) <= 1e-9 for vals in by_pattern.values())


CHECKS = [
    ("refinement vs brute-force recursion", check_refinement),
    ("integer memorizer exactness", check_integer_memorizer),
    ("pattern memorizer round trip", check_pattern_memorizer),
    ("gradients vs finite differences", check_gradients),
    ("L1 min-norm generalization boundary", check_min_norm),
    ("pattern-constant node outputs", check_theorem_consistency),
]


def run_all_checks() -> bool:
    ok = True
    for name, fn in CHECKS:
        passed = fn()
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok = ok and passed
    return ok
