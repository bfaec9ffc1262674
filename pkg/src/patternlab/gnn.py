"""First-order message-passing networks.

A layer maps per-node states H by
``H_v <- act(W2 @ H_v + sum_{u in N(v)} W1 @ H_u + b)``.
A model is a stack of such layers (the trunk), an optional sum readout for
graph-level outputs, a fully connected suffix, and named heads on top of the
suffix.  Constructed and trained networks share this one representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graphs import Graph
from .neural import (
    DenseLayer,
    DenseParams,
    _activation_grad,
    _apply_activation,
    init_dense,
    loss_and_grad,
    loss_value,
    mlp_backward,
    mlp_forward_trace,
)
from .rng import RngStream

__all__ = [
    "GnnLayer",
    "GnnModel",
    "init_features",
    "gnn_layer_forward",
    "gnn_forward",
    "gnn_gradients",
    "sample_teacher",
    "param_arrays",
    "param_names",
    "gnn_loss_and_grad",
    "evaluate_loss",
    "evaluate_accuracy",
]


@dataclass
class GnnLayer:
    w1: np.ndarray  # (out, in), applied to the neighbor sum
    w2: np.ndarray  # (out, in), applied to the node's own state
    b: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.w1.shape != self.w2.shape or self.w1.shape[0] != self.b.shape[0]:
            raise ValueError("layer parameter shapes incompatible")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w1.shape[0]


@dataclass
class GnnModel:
    """Message-passing trunk + readout tag + dense suffix + named heads.

    ``readout`` is "sum" for graph-level outputs or "none" for node-level
    outputs; ``head_readout`` may override it per head.  An empty suffix or
    head acts as the identity.
    """

    layers: list[GnnLayer]
    readout: str = "sum"
    suffix: DenseParams = field(default_factory=DenseParams)
    heads: dict[str, DenseParams] = field(default_factory=dict)
    head_readout: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.readout not in ("sum", "none"):
            raise ValueError(f"unknown readout {self.readout!r}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.in_dim != prev.out_dim:
                raise ValueError("adjacent message layer dimensions incompatible")
        if not self.heads:
            self.heads = {"main": DenseParams()}

    @property
    def in_dim(self) -> int:
        if self.layers:
            return self.layers[0].in_dim
        if self.suffix.layers:
            return self.suffix.in_dim
        raise ValueError("model has no layers")

    def readout_for(self, head: str) -> str:
        return self.head_readout.get(head, self.readout)

    def copy(self) -> "GnnModel":
        return GnnModel(
            [GnnLayer(l.w1.copy(), l.w2.copy(), l.b.copy(), l.activation) for l in self.layers],
            self.readout,
            self.suffix.copy(),
            {name: mlp.copy() for name, mlp in self.heads.items()},
            dict(self.head_readout),
        )


def init_features(g: Graph, width: int) -> np.ndarray:
    """One-hot rows for each node's feature class, zero-padded to ``width``."""
    if width < g.num_classes:
        raise ValueError(f"width {width} smaller than num_classes {g.num_classes}")
    h = np.zeros((g.num_nodes, width))
    if g.num_nodes:
        h[np.arange(g.num_nodes), np.array(g.features)] = 1.0
    return h


def gnn_layer_forward(layer: GnnLayer, g: Graph, h: np.ndarray) -> np.ndarray:
    if h.shape[1] != layer.in_dim:
        raise ValueError(f"state width {h.shape[1]} does not match layer input {layer.in_dim}")
    msg = g.dense_adjacency @ h
    return _apply_activation(layer.activation, h @ layer.w2.T + msg @ layer.w1.T + layer.b)


def _trunk_forward(model: GnnModel, g: Graph) -> np.ndarray:
    h = init_features(g, model.in_dim)
    for layer in model.layers:
        h = gnn_layer_forward(layer, g, h)
    return h


def gnn_forward(model: GnnModel, g: Graph, head: str = "main") -> np.ndarray:
    """Trunk, then (sum readout | per-node), then suffix, then the named head.

    Returns an (out,) vector for graph-level heads and a (num_nodes, out)
    matrix for node-level heads.
    """
    if head not in model.heads:
        raise KeyError(f"unknown head {head!r}; available: {sorted(model.heads)}")
    h = _trunk_forward(model, g)
    if model.readout_for(head) == "sum":
        x = h.sum(axis=0)
        return model.heads[head].forward(model.suffix.forward(x))
    return model.heads[head].forward(model.suffix.forward(h))


def sample_teacher(
    message_dims: Sequence[int],
    suffix_dims: Sequence[int],
    rng: RngStream,
    readout: str = "sum",
    activation: str = "relu",
    scale: float = 0.1,
) -> GnnModel:
    """Model with every weight and bias i.i.d. uniform on [-scale, +scale].

    Callers freeze it by convention: it is never passed to an optimizer.
    """
    gen = rng.generator()
    layers = []
    for d_in, d_out in zip(message_dims, message_dims[1:]):
        layers.append(
            GnnLayer(
                gen.uniform(-scale, scale, size=(d_out, d_in)),
                gen.uniform(-scale, scale, size=(d_out, d_in)),
                gen.uniform(-scale, scale, size=d_out),
                activation,
            )
        )
    suffix_layers = []
    for i, (d_in, d_out) in enumerate(zip(suffix_dims, suffix_dims[1:])):
        act = "identity" if i == len(suffix_dims) - 2 else activation
        suffix_layers.append(
            DenseLayer(
                gen.uniform(-scale, scale, size=(d_out, d_in)),
                gen.uniform(-scale, scale, size=d_out),
                act,
            )
        )
    return GnnModel(layers, readout, DenseParams(suffix_layers))


def param_arrays(model: GnnModel) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for layer in model.layers:
        out.extend((layer.w1, layer.w2, layer.b))
    out.extend(model.suffix.param_arrays())
    for name in sorted(model.heads):
        out.extend(model.heads[name].param_arrays())
    return out


def param_names(model: GnnModel) -> list[str]:
    names: list[str] = []
    for i in range(len(model.layers)):
        names.extend((f"layers[{i}].w1", f"layers[{i}].w2", f"layers[{i}].b"))
    for j in range(len(model.suffix.layers)):
        names.extend((f"suffix[{j}].w", f"suffix[{j}].b"))
    for name in sorted(model.heads):
        for j in range(len(model.heads[name].layers)):
            names.extend((f"heads[{name}][{j}].w", f"heads[{name}][{j}].b"))
    return names


def select_param_indices(
    model: GnnModel, include_trunk: bool = True, heads: Sequence[str] = ("main",)
) -> list[int]:
    """Indices into param_arrays covering the trunk/suffix and the named heads.

    Freezing the feature extractor is selecting with include_trunk=False.
    """
    picked = []
    for i, name in enumerate(param_names(model)):
        if name.startswith(("layers[", "suffix[")):
            if include_trunk:
                picked.append(i)
        elif any(name.startswith(f"heads[{h}]") for h in heads):
            picked.append(i)
    return picked


# ---------------------------------------------------------------------------
# batched evaluation engine
#
# Graphs in a batch are stacked as a disjoint union: node states are
# concatenated row-wise and the neighbor sum runs per graph on its dense
# adjacency, which is exact because a disjoint union adds no edges.
# ---------------------------------------------------------------------------


def _stacked_trunk_trace(model: GnnModel, graphs: Sequence[Graph]):
    slices = []
    start = 0
    for g in graphs:
        slices.append(slice(start, start + g.num_nodes))
        start += g.num_nodes
    h = np.zeros((start, model.in_dim))
    for g, sl in zip(graphs, slices):
        if g.num_classes > model.in_dim:
            raise ValueError(
                f"model width {model.in_dim} smaller than num_classes {g.num_classes}"
            )
        h[sl] = g.onehot_features(model.in_dim)
    trace = []
    for layer in model.layers:
        msg = np.empty_like(h[:, : layer.in_dim])
        for g, sl in zip(graphs, slices):
            msg[sl] = g.dense_adjacency @ h[sl]
        z = h @ layer.w2.T + msg @ layer.w1.T + layer.b
        a = _apply_activation(layer.activation, z)
        trace.append((h, msg, z, a))
        h = a
    return h, trace, slices


def _trunk_backward(model: GnnModel, graphs, slices, trace, d_states: np.ndarray):
    """Reverse pass through the message layers.

    The neighbor-sum adjoint accumulates W1-terms from every node that
    aggregates the current one; with symmetric adjacency that is A @ (dZ W1).
    """
    grads_rev = []
    d = d_states
    for layer, (h_in, msg, z, a) in zip(reversed(model.layers), reversed(trace)):
        dz = d * _activation_grad(layer.activation, z, a)
        dw1 = dz.T @ msg
        dw2 = dz.T @ h_in
        db = dz.sum(axis=0)
        d_msg = dz @ layer.w1
        d = dz @ layer.w2
        for g, sl in zip(graphs, slices):
            d[sl] += g.dense_adjacency @ d_msg[sl]
        grads_rev.append((dw1, dw2, db))
    return list(reversed(grads_rev))


def _zeros_like_params(params: DenseParams) -> list[np.ndarray]:
    return [np.zeros_like(a) for a in params.param_arrays()]


def gnn_loss_and_grad(
    model: GnnModel,
    items: Sequence[tuple[Graph, np.ndarray]],
    head: str = "main",
    loss_tag: str = "mse",
):
    """Loss and exact gradients over a batch of (graph, target) pairs.

    Graph-level heads score one prediction per graph; node-level heads score
    one prediction per node, with every node weighted equally across the
    batch.  Gradients align with :func:`param_arrays`; inactive heads get
    zeros.
    """
    if head not in model.heads:
        raise KeyError(f"unknown head {head!r}")
    graphs = [g for g, _ in items]
    out, trace, slices = _stacked_trunk_trace(model, graphs)
    graph_level = model.readout_for(head) == "sum"
    if graph_level:
        pooled = np.stack([out[sl].sum(axis=0) for sl in slices])
        suffix_out, suffix_trace = mlp_forward_trace(model.suffix, pooled)
    else:
        suffix_out, suffix_trace = mlp_forward_trace(model.suffix, out)
    head_out, head_trace = mlp_forward_trace(model.heads[head], suffix_out)

    if graph_level:
        target = np.stack([np.atleast_1d(np.asarray(y, dtype=np.float64)) for _, y in items])
        if loss_tag == "cross_entropy":
            target = np.array([int(y) for _, y in items])
    else:
        target = np.concatenate(
            [np.asarray(y, dtype=np.float64).reshape(g.num_nodes, -1) for g, y in items]
        )
        if loss_tag == "cross_entropy":
            target = np.concatenate(
                [np.asarray(y, dtype=np.int64).reshape(-1) for _, y in items]
            )
    if head_out.shape[-1] != (1 if target.ndim == 1 else target.shape[-1]) and loss_tag == "mse":
        raise ValueError(
            f"target dim {target.shape} does not match head output {head_out.shape}"
        )
    loss, d_pred = loss_and_grad(loss_tag, head_out, target)

    head_grads, d_suffix_out = mlp_backward(model.heads[head], head_trace, d_pred)
    suffix_grads, d_pre_suffix = mlp_backward(model.suffix, suffix_trace, d_suffix_out)
    if graph_level:
        d_states = np.zeros_like(out)
        for i, sl in enumerate(slices):
            d_states[sl] = d_pre_suffix[i]
    else:
        d_states = d_pre_suffix
    layer_grads = _trunk_backward(model, graphs, slices, trace, d_states)

    flat: list[np.ndarray] = []
    for dw1, dw2, db in layer_grads:
        flat.extend((dw1, dw2, db))
    flat.extend(suffix_grads)
    for name in sorted(model.heads):
        if name == head:
            flat.extend(head_grads)
        else:
            flat.extend(_zeros_like_params(model.heads[name]))
    return loss, flat


def gnn_gradients(
    model: GnnModel,
    g: Graph,
    head: str = "main",
    loss_tag: str = "mse",
    target: np.ndarray | None = None,
):
    """Single-graph convenience wrapper around :func:`gnn_loss_and_grad`."""
    if target is None:
        raise ValueError("target required")
    return gnn_loss_and_grad(model, [(g, target)], head, loss_tag)


def evaluate_loss(
    model: GnnModel,
    items: Sequence[tuple[Graph, np.ndarray]],
    head: str = "main",
    loss_tag: str = "mse",
) -> float:
    """Loss over a dataset without gradients, in deterministic order."""
    graphs = [g for g, _ in items]
    out, _, slices = _stacked_trunk_trace(model, graphs)
    graph_level = model.readout_for(head) == "sum"
    if graph_level:
        pooled = np.stack([out[sl].sum(axis=0) for sl in slices])
        preds = model.heads[head].forward(model.suffix.forward(pooled))
        if loss_tag == "cross_entropy":
            target = np.array([int(y) for _, y in items])
        else:
            target = np.stack(
                [np.atleast_1d(np.asarray(y, dtype=np.float64)) for _, y in items]
            )
    else:
        preds = model.heads[head].forward(model.suffix.forward(out))
        if loss_tag == "cross_entropy":
            target = np.concatenate([np.asarray(y, dtype=np.int64).reshape(-1) for _, y in items])
        else:
            target = np.concatenate(
                [np.asarray(y, dtype=np.float64).reshape(g.num_nodes, -1) for g, y in items]
            )
    return loss_value(loss_tag, preds, target)


def evaluate_accuracy(
    model: GnnModel, items: Sequence[tuple[Graph, int]], head: str = "main"
) -> float:
    """Argmax accuracy for classification heads (graph-level)."""
    graphs = [g for g, _ in items]
    out, _, slices = _stacked_trunk_trace(model, graphs)
    pooled = np.stack([out[sl].sum(axis=0) for sl in slices])
    preds = model.heads[head].forward(model.suffix.forward(pooled))
    labels = np.array([int(y) for _, y in items])
    return float(np.mean(np.argmax(preds, axis=1) == labels))


def build_student(
    num_classes: int,
    width: int,
    depth: int,
    out_dim: int,
    rng: RngStream,
    readout: str = "sum",
    activation: str = "relu",
    heads: dict[str, int] | None = None,
) -> GnnModel:
    """Trainable model: `depth` message layers of `width`, a two-layer dense
    suffix, and 2-layer heads sized per the `heads` mapping (name -> out dim).

    With ``heads`` given the suffix is empty and each head is its own
    two-layer network on the trunk output, which is the shape the
    self-supervised protocols train.
    """
    gen_stream = rng.split("student")
    dims = [num_classes] + [width] * depth
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        sub = gen_stream.split(f"layer{i}").generator()
        bound = 1.0 / math.sqrt(d_in)
        layers.append(
            GnnLayer(
                sub.uniform(-bound, bound, size=(d_out, d_in)),
                sub.uniform(-bound, bound, size=(d_out, d_in)),
                sub.uniform(-bound, bound, size=d_out),
                activation,
            )
        )
    if heads is None:
        suffix = init_dense([width, width, out_dim], gen_stream.split("suffix"), activation)
        return GnnModel(layers, readout, suffix)
    head_map = {
        name: init_dense([width, width, dim], gen_stream.split(f"head-{name}"), activation)
        for name, dim in sorted(heads.items())
    }
    return GnnModel(layers, readout, DenseParams(), head_map)
