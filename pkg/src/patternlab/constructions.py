"""Hand-built networks with provable behavior.

Includes an exact one-hidden-layer integer memorizer, a message-passing
network that realizes any target assignment on depth-d patterns, builders
that graft a divergence channel onto a working model so it fails exactly on
unseen local structures, and closed-form analysis of the single-linear-layer
edge-counting objective.

All constructed weights are small integers (targets excepted), so pattern
detection is exact in float64: pre-activations of distinct patterns differ
by at least 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Collection, Iterable, Sequence

import numpy as np

from .gnn import GnnLayer, GnnModel, gnn_forward
from .graphs import Graph
from .neural import DenseLayer, DenseParams
from .patterns import PatternHistogram, PatternId, PatternTable, refine_patterns

__all__ = [
    "PatternTargetSpec",
    "LinearEdgeCountProblem",
    "SolutionSpace",
    "UncoveredPatternError",
    "build_integer_memorizer",
    "integer_memorizer_params",
    "evaluate_integer_memorizer",
    "build_pattern_memorizer",
    "build_bad_graph_gnn",
    "build_bad_node_gnn",
    "build_edge_count_gnn",
    "pattern_spec_from_graphs",
    "check_pattern_coverage",
    "node_mismatch_fraction",
    "edge_count_solution_space",
    "min_norm_solution",
    "gd_projection_check",
]


class UncoveredPatternError(RuntimeError):
    """A graph contains a pattern outside a constructed model's target map."""


# ---------------------------------------------------------------------------
# integer memorizer: one hidden ReLU layer fitting arbitrary values on 1..N
# ---------------------------------------------------------------------------


def build_integer_memorizer(n_points: int, ys: Sequence[float]):
    """Weights (w1, w2, b) with f(n) = w2 . relu(w1*n - b) satisfying
    f(n) = ys[n-1] for 1 <= n <= N and
    f(n) = (n-N+1)*ys[N-1] - (n-N)*ys[N-2] for n > N.

    w1 is all ones and b = (0, 1, ..., N-1), so relu(n - b) is the staircase
    basis; w2 holds its second differences, which keeps coefficients bounded
    by 4*max|y|.
    """
    if n_points < 1:
        raise ValueError("need at least one point")
    ys = [float(y) for y in ys]
    if len(ys) != n_points:
        raise ValueError("ys must have exactly n_points values")
    w1 = np.ones(n_points)
    b = np.arange(n_points, dtype=np.float64)
    w2 = np.zeros(n_points)
    for i in range(n_points):
        if i == 0:
            w2[i] = ys[0]
        elif i == 1:
            w2[i] = ys[1] - 2.0 * ys[0]
        else:
            w2[i] = ys[i] - 2.0 * ys[i - 1] + ys[i - 2]
    return w1, w2, b


def evaluate_integer_memorizer(weights, n: float) -> float:
    w1, w2, b = weights
    return float(w2 @ np.maximum(w1 * n - b, 0.0))


def integer_memorizer_params(weights) -> DenseParams:
    """The same function as a two-layer DenseParams (scalar in, scalar out)."""
    w1, w2, b = weights
    return DenseParams(
        [
            DenseLayer(w1[:, None], -b, "relu"),
            DenseLayer(w2[None, :], np.zeros(1), "identity"),
        ]
    )


# ---------------------------------------------------------------------------
# pattern memorizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternTargetSpec:
    """Target assignment on depth-`depth` patterns.

    ``table`` must expand every target pattern down to feature classes;
    ``max_degree`` bounds the degree of any graph the built model will see.
    """

    depth: int
    targets: dict[PatternId, float]
    max_degree: int
    num_classes: int
    table: PatternTable

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.max_degree < 1:
            raise ValueError("max_degree must be at least 1")
        for pid, y in self.targets.items():
            if pid.depth != self.depth:
                raise ValueError(f"target pattern {pid} has depth {pid.depth} != {self.depth}")
            if not math.isfinite(y):
                raise ValueError("targets must be finite")
            if pid not in self.table:
                raise ValueError(f"pattern {pid} missing from table")

    def digest(self) -> str:
        """Short content hash of (depth, targets, bounds) for provenance headers."""
        import hashlib

        h = hashlib.blake2b(digest_size=8)
        h.update(f"{self.depth}|{self.max_degree}|{self.num_classes}".encode())
        for pid in sorted(self.targets):
            h.update(pid.digest)
            h.update(f"{self.targets[pid]:.17g}".encode())
        return h.hexdigest()

    def provenance(self, builder: str) -> str:
        return f"{builder} targets={self.digest()}"


def _closure_levels(spec: PatternTargetSpec) -> list[list[PatternId]]:
    """Per-depth pattern sets reachable inside graphs covered by the spec.

    Walking parents and neighbor multisets down from the target patterns
    closes the set: if every node's depth-d pattern is a target, every node's
    depth-t pattern for t < d lies in these levels.
    """
    levels: list[set[PatternId]] = [set() for _ in range(spec.depth + 1)]
    levels[spec.depth] = set(spec.targets)
    for t in range(spec.depth, 0, -1):
        for pid in levels[t]:
            parent, children = spec.table.expansion(pid)
            levels[t - 1].add(parent)
            for child, _mult in children:
                levels[t - 1].add(child)
    return [sorted(level) for level in levels]


def _threshold_layer(
    sel: np.ndarray, max_degree: int
) -> tuple[GnnLayer, int]:
    """Message layer producing [relu(count_i - r) for r in 0..N] + own one-hot.

    ``sel`` maps the incoming state to a one-hot over the current pattern
    list (identity except at depth 1, where it selects feature classes), so
    count_i sums neighbor one-hots.  All pre-activations are integers.
    """
    p, d_in = sel.shape
    n_thr = max_degree + 1
    w1 = np.zeros((p * n_thr + p, d_in))
    w2 = np.zeros_like(w1)
    b = np.zeros(p * n_thr + p)
    for i in range(p):
        for r in range(n_thr):
            w1[i * n_thr + r] = sel[i]
            b[i * n_thr + r] = -float(r)
    w2[p * n_thr :, :] = sel
    return GnnLayer(w1, w2, b, "relu"), p * n_thr


def _decode_matrix(
    prev: list[PatternId],
    current: list[PatternId],
    table: PatternTable,
    max_degree: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Affine map from a threshold state over ``prev`` to AND pre-activations
    over ``current``: output q is 1 exactly when the node's pattern is q and
    is a non-positive integer otherwise.

    The count-equals-k indicator is a second difference of the thresholds,
    and the conjunction over all prev patterns plus the parent bit is a sum
    shifted by the bit count minus one.
    """
    p = len(prev)
    n_thr = max_degree + 1
    idx = {pid: i for i, pid in enumerate(prev)}
    dim_in = p * n_thr + p
    w = np.zeros((len(current), dim_in))
    b = np.zeros(len(current))
    for row, q in enumerate(current):
        parent, children = table.expansion(q)
        mult = {idx[child]: m for child, m in children}
        for i in range(p):
            k = mult.get(i, 0)
            base = i * n_thr
            if k == 0:
                # bit = 1 - thr(c) + thr(c-1)
                b[row] += 1.0
                w[row, base + 0] -= 1.0
                if n_thr > 1:
                    w[row, base + 1] += 1.0
            else:
                if k > max_degree:
                    raise ValueError(f"multiplicity {k} exceeds max_degree {max_degree}")
                w[row, base + k - 1] += 1.0
                w[row, base + k] -= 2.0
                if k + 1 <= max_degree:
                    w[row, base + k + 1] += 1.0
        w[row, p * n_thr + idx[parent]] += 1.0
        b[row] -= float(p)
    return w, b


def build_pattern_memorizer(spec: PatternTargetSpec) -> GnnModel:
    """Network whose node outputs equal ``spec.targets`` exactly.

    On any graph with max degree <= spec.max_degree whose node depth-d
    patterns all lie in the target map, node v's output is the target of its
    pattern, bit-exactly: the trunk turns each node's pattern into a one-hot
    with integer margins and the two-layer suffix reads the target off it.

    Use :func:`check_pattern_coverage` before evaluating on untrusted
    graphs; on uncovered inputs the network's output is unspecified.
    """
    levels = _closure_levels(spec)
    n = spec.max_degree
    layers: list[GnnLayer] = []
    if spec.depth >= 1:
        sel0 = np.zeros((len(levels[0]), spec.num_classes))
        for i, pid in enumerate(levels[0]):
            cls = spec.table.feature_class(pid)
            if cls >= spec.num_classes:
                raise ValueError("pattern feature class outside num_classes")
            sel0[i, cls] = 1.0
        layer, _ = _threshold_layer(sel0, n)
        layers.append(layer)
        for t in range(2, spec.depth + 1):
            w, b = _decode_matrix(levels[t - 2], levels[t - 1], spec.table, n)
            layers.append(GnnLayer(np.zeros_like(w), w, b, "relu"))
            layer, _ = _threshold_layer(np.eye(len(levels[t - 1])), n)
            layers.append(layer)
        w_and, b_and = _decode_matrix(levels[spec.depth - 1], levels[spec.depth], spec.table, n)
    else:
        # depth 0: patterns are feature classes; select them straight off the input
        w_and = np.zeros((len(levels[0]), spec.num_classes))
        for i, pid in enumerate(levels[0]):
            w_and[i, spec.table.feature_class(pid)] = 1.0
        b_and = np.zeros(len(levels[0]))
    y_row = np.array([[spec.targets[q] for q in levels[spec.depth]]])
    suffix = DenseParams(
        [
            DenseLayer(w_and, b_and, "relu"),
            DenseLayer(y_row, np.zeros(1), "identity"),
        ]
    )
    return GnnModel(layers, "none", suffix)


def pattern_spec_from_graphs(
    graphs: Sequence[Graph],
    depth: int,
    targets: dict[PatternId, float] | Callable[[PatternId, PatternTable], float],
    max_degree: int | None = None,
) -> PatternTargetSpec:
    """Refine graphs, collect their depth-`depth` patterns, and attach targets.

    ``targets`` is either a ready map or a callable of (pattern id, table) so
    targets can be derived from the pattern's expansion (e.g. its degree).
    """
    table = PatternTable()
    seen: list[PatternId] = []
    got: set[PatternId] = set()
    max_deg = 1
    for g in graphs:
        levels, table = refine_patterns(g, depth, table)
        if g.num_nodes:
            max_deg = max(max_deg, int(g.degrees.max()))
        for pid in levels[depth]:
            if pid not in got:
                got.add(pid)
                seen.append(pid)
    if callable(targets):
        target_map = {pid: float(targets(pid, table)) for pid in seen}
    else:
        target_map = {pid: float(targets[pid]) for pid in seen}
    classes = {g.num_classes for g in graphs}
    if len(classes) != 1:
        raise ValueError("graphs must share num_classes")
    return PatternTargetSpec(
        depth=depth,
        targets=target_map,
        max_degree=max_degree if max_degree is not None else max_deg,
        num_classes=classes.pop(),
        table=table,
    )


def check_pattern_coverage(spec: PatternTargetSpec, g: Graph) -> list[PatternId]:
    """Raise UncoveredPatternError unless every node pattern of g is a target.

    Returns the per-node depth-d pattern ids on success.
    """
    if g.num_classes != spec.num_classes:
        raise UncoveredPatternError(
            f"graph has {g.num_classes} feature classes, spec expects {spec.num_classes}"
        )
    if g.num_nodes and int(g.degrees.max()) > spec.max_degree:
        raise UncoveredPatternError(
            f"max degree {int(g.degrees.max())} exceeds spec bound {spec.max_degree}"
        )
    levels, _ = refine_patterns(g, spec.depth)
    missing = [pid for pid in levels[spec.depth] if pid not in spec.targets]
    if missing:
        raise UncoveredPatternError(
            f"{len(missing)} node pattern(s) absent from the target map"
        )
    return levels[spec.depth]


# ---------------------------------------------------------------------------
# divergence builders
# ---------------------------------------------------------------------------


def _as_node_layers(params: DenseParams) -> list[GnnLayer]:
    return [
        GnnLayer(np.zeros_like(l.w), l.w, l.b, l.activation) for l in params.layers
    ]


def _passthrough(dim: int) -> GnnLayer:
    return GnnLayer(np.zeros((dim, dim)), np.eye(dim), np.zeros(dim), "relu")


def _combine_layers(a: list[GnnLayer], b: list[GnnLayer], in_dim: int) -> list[GnnLayer]:
    """Run two trunks side by side on a shared input.

    Layer 0 stacks both first layers over the common input; later layers are
    block-diagonal.  Every combined layer is ReLU, which both sides tolerate
    because their states stay non-negative.
    """
    if len(a) != len(b):
        raise ValueError("trunks must have equal depth before combining")
    out: list[GnnLayer] = []
    for i, (la, lb) in enumerate(zip(a, b)):
        if la.activation != "relu" or lb.activation != "relu":
            raise ValueError("combined trunks require ReLU layers")
        if i == 0:
            if la.in_dim != in_dim or lb.in_dim != in_dim:
                raise ValueError("first layers must read the shared input width")
            w1 = np.vstack([la.w1, lb.w1])
            w2 = np.vstack([la.w2, lb.w2])
        else:
            w1 = np.block(
                [
                    [la.w1, np.zeros((la.out_dim, lb.in_dim))],
                    [np.zeros((lb.out_dim, la.in_dim)), lb.w1],
                ]
            )
            w2 = np.block(
                [
                    [la.w2, np.zeros((la.out_dim, lb.in_dim))],
                    [np.zeros((lb.out_dim, la.in_dim)), lb.w2],
                ]
            )
        out.append(GnnLayer(w1, w2, np.concatenate([la.b, lb.b]), "relu"))
    return out


def _relu_guard_layers(params: DenseParams, label: str) -> None:
    for layer in params.layers:
        if layer.activation not in ("relu", "identity"):
            raise ValueError(f"{label} must use relu/identity activations")


def build_bad_graph_gnn(
    correct: GnnModel,
    train_patterns: Collection[PatternId],
    unseen_patterns: Collection[PatternId],
    table: PatternTable,
    max_degree: int,
    num_classes: int,
    y_max: float,
    penalty: float | None = None,
) -> GnnModel:
    """Model equal to ``correct`` on graphs whose node patterns all lie in
    ``train_patterns`` and off by at least ``penalty`` on any graph containing
    a pattern from ``unseen_patterns``.

    A parallel flag channel outputs 1 per unseen-pattern node and 0 per
    training-pattern node; sum readout turns that into an unseen-node count
    and the final layer adds penalty * count to the original scalar output.
    Behavior on patterns outside the union of the two sets is unspecified;
    guard with :func:`check_pattern_coverage` on the union spec, or skip the
    guard to let such graphs be penalized or mislabeled silently.
    """
    if penalty is None:
        penalty = 4.0 * abs(y_max)
    if penalty <= 0:
        raise ValueError("penalty must be positive")
    if correct.readout != "sum":
        raise ValueError("graph-task divergence needs a sum-readout model")
    if correct.heads.get("main") is not None and correct.heads["main"].layers:
        raise ValueError("correct model must keep its head empty (fold it into the suffix)")
    flag_targets = {pid: 0.0 for pid in train_patterns}
    for pid in unseen_patterns:
        flag_targets[pid] = 1.0
    if not flag_targets:
        raise ValueError("no patterns supplied")
    depths = {pid.depth for pid in flag_targets}
    if len(depths) != 1:
        raise ValueError("patterns must share one depth")
    flag_spec = PatternTargetSpec(
        depth=depths.pop(),
        targets=flag_targets,
        max_degree=max_degree,
        num_classes=num_classes,
        table=table,
    )
    flag_model = build_pattern_memorizer(flag_spec)
    flag_trunk = list(flag_model.layers) + _as_node_layers(flag_model.suffix)
    # the flag suffix ends with an identity layer; under relu its 0/1 output
    # is unchanged, so the whole combined trunk can be relu
    for layer in flag_trunk:
        layer.activation = "relu"

    h_trunk = [
        GnnLayer(l.w1.copy(), l.w2.copy(), l.b.copy(), l.activation) for l in correct.layers
    ]
    depth_gap = len(flag_trunk) - len(h_trunk)
    in_dim = correct.in_dim
    if depth_gap > 0:
        h_trunk = [_passthrough(in_dim) for _ in range(depth_gap)] + h_trunk
    elif depth_gap < 0:
        flag_trunk = [_passthrough(num_classes) for _ in range(-depth_gap)] + flag_trunk
    combined_trunk = _combine_layers(h_trunk, flag_trunk, in_dim)

    _relu_guard_layers(correct.suffix, "correct model suffix")
    suffix_layers: list[DenseLayer] = []
    for layer in correct.suffix.layers:
        w = np.block(
            [
                [layer.w, np.zeros((layer.w.shape[0], 1))],
                [np.zeros((1, layer.w.shape[1])), np.ones((1, 1))],
            ]
        )
        suffix_layers.append(
            DenseLayer(w, np.concatenate([layer.b, [0.0]]), layer.activation)
        )
    width_before_final = (
        correct.suffix.out_dim if correct.suffix.layers else correct.layers[-1].out_dim
    )
    if width_before_final != 1:
        raise ValueError("graph-task divergence expects a scalar-output model")
    suffix_layers.append(DenseLayer(np.array([[1.0, penalty]]), np.zeros(1), "identity"))
    return GnnModel(combined_trunk, "sum", DenseParams(suffix_layers))


def build_bad_node_gnn(
    spec: PatternTargetSpec, bad: Collection[PatternId]
) -> GnnModel:
    """Memorizer that answers correctly off ``bad`` and incorrectly on it.

    The wrong answer is target + 1, which always differs, so the empirical
    0-1 losses on a node population are exactly the pattern masses of
    ``bad`` under that population's histogram.
    """
    bad = set(bad)
    outside = bad - set(spec.targets)
    if outside:
        raise ValueError(f"{len(outside)} bad pattern(s) outside the target map")
    flipped = {
        pid: (y + 1.0 if pid in bad else y) for pid, y in spec.targets.items()
    }
    return build_pattern_memorizer(
        PatternTargetSpec(
            spec.depth, flipped, spec.max_degree, spec.num_classes, spec.table
        )
    )


def node_mismatch_fraction(
    model: GnnModel,
    graphs: Sequence[Graph],
    correct_targets: dict[PatternId, float],
    depth: int,
    atol: float = 1e-9,
) -> tuple[int, int]:
    """(wrong node count, total node count) of model outputs vs per-pattern targets."""
    wrong = 0
    total = 0
    for g in graphs:
        levels, _ = refine_patterns(g, depth)
        out = gnn_forward(model, g).reshape(-1)
        for v, pid in enumerate(levels[depth]):
            total += 1
            if abs(out[v] - correct_targets[pid]) > atol:
                wrong += 1
    return wrong, total


def build_edge_count_gnn(num_classes: int = 1) -> GnnModel:
    """Exact edge counter: one layer writes each node's degree, sum readout
    gives twice the edge count, and the suffix halves it."""
    layer = GnnLayer(
        np.ones((1, num_classes)), np.zeros((1, num_classes)), np.zeros(1), "relu"
    )
    suffix = DenseParams([DenseLayer(np.array([[0.5]]), np.zeros(1), "identity")])
    return GnnModel([layer], "sum", suffix)


# ---------------------------------------------------------------------------
# single linear layer on the edge-count task
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearEdgeCountProblem:
    """Squared loss of a one-layer linear model predicting edge counts.

    With uniform scalar features, self weight w1, neighbor weight w2 and bias
    b, the per-graph loss is (n*w1 + 2m*w2 + n*b - m)^2: w1 and b enter only
    through s = w1 + b.
    """

    pairs: tuple[tuple[int, int], ...]  # (nodes n_i, edges m_i)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError("need at least one training pair")
        for n, m in self.pairs:
            if n < 1 or m < 0:
                raise ValueError(f"invalid pair ({n},{m})")

    def loss(self, w1: float, w2: float, b: float) -> float:
        return math.fsum(
            (n * w1 + 2 * m * w2 + n * b - m) ** 2 for n, m in self.pairs
        )

    def grad(self, w1: float, w2: float, b: float) -> np.ndarray:
        g = np.zeros(3)
        for n, m in self.pairs:
            r = 2.0 * (n * w1 + 2 * m * w2 + n * b - m)
            g += r * np.array([n, 2.0 * m, n])
        return g


@dataclass(frozen=True)
class SolutionSpace:
    """Zero-loss set of a LinearEdgeCountProblem in (s = w1 + b, w2) form.

    Degenerate (single node/edge ratio) problems have a full line of zero-loss
    solutions; mixed-ratio problems collapse to the generalizing point
    s = 0, w2 = 1/2.
    """

    is_ratio_degenerate: bool
    ratio: float | None  # shared n/m, None when every pair is edgeless
    all_edgeless: bool
    generalizing: tuple[float, float, float]  # (w1, w2, b)

    def w2_of_s(self, s: float) -> float:
        if not self.is_ratio_degenerate:
            raise ValueError("mixed-ratio problems have a unique solution")
        if self.all_edgeless:
            raise ValueError("edgeless problems leave w2 free and force s = 0")
        return 0.5 - (self.ratio / 2.0) * s

    def sample(self, s: float) -> tuple[float, float, float]:
        """A zero-loss (w1, w2, b) with w1 = s, b = 0 when s is free."""
        if not self.is_ratio_degenerate:
            return self.generalizing
        if self.all_edgeless:
            return (0.0, s, 0.0)  # here the free coordinate is w2
        return (s, self.w2_of_s(s), 0.0)


def edge_count_solution_space(problem: LinearEdgeCountProblem) -> SolutionSpace:
    """Classify the zero-loss set.

    Pairs sharing the node/edge ratio leave an affine line of solutions;
    pairs with different ratios (or an edgeless pair mixed with edged ones)
    pin the unique generalizing solution s = 0, w2 = 1/2.
    """
    generalizing = (0.0, 0.5, 0.0)
    edged = [(n, m) for n, m in problem.pairs if m > 0]
    if not edged:
        return SolutionSpace(True, None, True, generalizing)
    n0, m0 = edged[0]
    same_ratio = all(n * m0 == n0 * m for n, m in edged)
    has_edgeless = len(edged) < len(problem.pairs)
    if same_ratio and not has_edgeless:
        return SolutionSpace(True, n0 / m0, False, generalizing)
    return SolutionSpace(False, None, False, generalizing)


def min_norm_solution(n: int, m: int, norm: str) -> tuple[float, float, float]:
    """Minimum-norm zero-loss (w1, w2, b) for a single pair with m >= 1.

    The zero-loss set is w2 = 1/2 - (n/2m) * s over s = w1 + b; the L1 mass
    of s goes entirely to w1.  For L1 the minimizer is the generalizing
    point exactly when 2m > n; at 2m = n the flat tie is broken toward the
    non-generalizing endpoint s = m/n.  For L2 it is the orthogonal
    projection of the origin onto the constraint plane.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    a = n / (2.0 * m)
    if norm == "l1":
        if n < 2 * m:
            return (0.0, 0.5, 0.0)
        s = m / n
        return (s, 0.0, 0.0)
    if norm == "l2":
        s = a / (1.0 + 2.0 * a * a)
        return (s / 2.0, 0.5 - a * s, s / 2.0)
    raise ValueError(f"unknown norm {norm!r}")


@dataclass(frozen=True)
class GdProjectionResult:
    final: tuple[float, float, float]
    predicted: tuple[float, float, float]
    distance: float
    steps_run: int


def gd_projection_check(
    problem: LinearEdgeCountProblem,
    init: Sequence[float],
    lr: float = 1e-4,
    steps: int = 10000,
) -> GdProjectionResult:
    """Run plain gradient descent and compare against the projection limit.

    For a fixed-ratio problem the zero-loss set is an affine subspace and the
    gradient always points along its normal, so gradient flow converges to
    the orthogonal projection of the initial point; the returned distance
    measures how closely finite-step descent matches that.
    """
    space = edge_count_solution_space(problem)
    if not space.is_ratio_degenerate:
        raise ValueError("gd projection analysis requires a fixed-ratio problem")
    x = np.asarray(init, dtype=np.float64).copy()
    if x.shape != (3,):
        raise ValueError("init must be (w1, w2, b)")
    rows = np.array([[n, 2.0 * m, n] for n, m in problem.pairs])
    rhs = np.array([float(m) for _, m in problem.pairs])
    predicted, *_ = np.linalg.lstsq(rows, rhs - rows @ x, rcond=None)
    predicted = x + predicted
    prev_loss = problem.loss(*x)
    rising = 0
    run = 0
    for run in range(1, steps + 1):
        x -= lr * problem.grad(*x)
        loss = problem.loss(*x)
        if loss > prev_loss:
            rising += 1
            if rising >= 100:
                raise RuntimeError("gradient descent diverged")
        else:
            rising = 0
        prev_loss = loss
    distance = float(np.linalg.norm(x - predicted))
    return GdProjectionResult(tuple(x), tuple(predicted), distance, run)
