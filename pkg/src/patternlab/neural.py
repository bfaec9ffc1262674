"""Minimal dense neural-network kernel: forward, exact reverse-mode gradients,
losses, ADAM with decoupled weight decay, and an early-stopping train loop.

Everything is 64-bit; training is single-threaded with a fixed summation
order, so identical inputs give bit-identical histories.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .rng import RngStream

__all__ = [
    "DenseLayer",
    "DenseParams",
    "AdamState",
    "TrainConfig",
    "TrainHistory",
    "mlp_forward",
    "mlp_forward_trace",
    "backprop",
    "adam_step",
    "finite_diff_grad",
    "train_loop",
    "loss_value",
    "loss_and_grad",
    "init_dense",
]

ACTIVATIONS = ("relu", "tanh", "sigmoid", "identity")


def _apply_activation(tag: str, z: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    if tag == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if tag == "identity":
        return z
    raise ValueError(f"unknown activation {tag!r}")


def _activation_grad(tag: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    """d(activation)/d(pre-activation), given pre-activation z and output a.

    The relu branch returns a bool mask; multiplying it into a float array
    upcasts without the extra astype allocation.
    """
    if tag == "relu":
        return z > 0.0
    if tag == "tanh":
        return 1.0 - a * a
    if tag == "sigmoid":
        return a * (1.0 - a)
    if tag == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class DenseLayer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.w.ndim != 2 or self.w.shape[0] != self.b.shape[0]:
            raise ValueError("weight/bias shapes incompatible")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class DenseParams:
    """An MLP as an ordered list of dense layers; an empty list is the identity."""

    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.w.shape[1] != prev.w.shape[0]:
                raise ValueError("adjacent layer dimensions incompatible")

    @property
    def in_dim(self) -> int | None:
        return self.layers[0].w.shape[1] if self.layers else None

    @property
    def out_dim(self) -> int | None:
        return self.layers[-1].w.shape[0] if self.layers else None

    def forward(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            y = _apply_activation(layer.activation, y @ layer.w.T + layer.b)
        return y

    def param_arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.append(layer.w)
            out.append(layer.b)
        return out

    def copy(self) -> "DenseParams":
        return DenseParams(
            [DenseLayer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers]
        )


def mlp_forward(params: DenseParams, x: np.ndarray) -> np.ndarray:
    """Sequential affine + activation application; x may be a vector or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if params.layers and x.shape[-1] != params.in_dim:
        raise ValueError(
            f"input dim {x.shape[-1]} does not match first layer dim {params.in_dim}"
        )
    return params.forward(x)


def mlp_forward_trace(params: DenseParams, x: np.ndarray):
    """Forward pass with recording; returns (output, trace) for backprop."""
    y = np.asarray(x, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    trace = []
    for layer in params.layers:
        z = y @ layer.w.T + layer.b
        a = _apply_activation(layer.activation, z)
        trace.append((y, z, a))
        y = a
    return y, trace


def mlp_backward(params: DenseParams, trace, d_out: np.ndarray):
    """Chain d(loss)/d(output) back through a recorded forward pass.

    Returns (grads aligned with param_arrays(), d(loss)/d(input)).
    """
    grads: list[np.ndarray] = []
    d = np.asarray(d_out, dtype=np.float64)
    if d.ndim == 1:
        d = d[None, :]
    rev: list[tuple[np.ndarray, np.ndarray]] = []
    for layer, (x_in, z, a) in zip(reversed(params.layers), reversed(trace)):
        dz = d * _activation_grad(layer.activation, z, a)
        rev.append((dz.T @ x_in, dz.sum(axis=0)))
        d = dz @ layer.w
    for dw, db in reversed(rev):
        grads.append(dw)
        grads.append(db)
    return grads, d


def loss_value(tag: str, pred: np.ndarray, target: np.ndarray) -> float:
    """Scalar loss; mse averages squared error over every element."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    if tag == "mse":
        t = np.broadcast_to(np.asarray(target, dtype=np.float64), pred.shape)
        return float(np.mean((pred - t) ** 2))
    if tag == "cross_entropy":
        labels = np.asarray(target, dtype=np.int64).reshape(-1)
        zmax = pred.max(axis=1, keepdims=True)
        logsumexp = zmax[:, 0] + np.log(np.exp(pred - zmax).sum(axis=1))
        return float(np.mean(logsumexp - pred[np.arange(len(labels)), labels]))
    raise ValueError(f"unknown loss {tag!r}")


def loss_and_grad(tag: str, pred: np.ndarray, target: np.ndarray):
    """Returns (loss, d(loss)/d(pred)) with pred treated as a (batch, out) array."""
    pred = np.atleast_2d(np.asarray(pred, dtype=np.float64))
    if tag == "mse":
        t = np.broadcast_to(np.asarray(target, dtype=np.float64), pred.shape)
        diff = pred - t
        return float(np.mean(diff**2)), 2.0 * diff / diff.size
    if tag == "cross_entropy":
        labels = np.asarray(target, dtype=np.int64).reshape(-1)
        zmax = pred.max(axis=1, keepdims=True)
        expz = np.exp(pred - zmax)
        softmax = expz / expz.sum(axis=1, keepdims=True)
        logsumexp = zmax[:, 0] + np.log(expz.sum(axis=1))
        loss = float(np.mean(logsumexp - pred[np.arange(len(labels)), labels]))
        d = softmax.copy()
        d[np.arange(len(labels)), labels] -= 1.0
        return loss, d / len(labels)
    raise ValueError(f"unknown loss {tag!r}")


def backprop(params: DenseParams, trace, loss_tag: str, target: np.ndarray):
    """Exact reverse-mode gradients of the scalar loss w.r.t. every parameter."""
    if len(trace) != len(params.layers):
        raise ValueError("trace does not match model layers")
    pred = trace[-1][2] if trace else None
    if pred is None:
        raise ValueError("empty model has no parameters to differentiate")
    loss, d_pred = loss_and_grad(loss_tag, pred, target)
    grads, _ = mlp_backward(params, trace, d_pred)
    return loss, grads


def finite_diff_grad(
    f: Callable[[list[np.ndarray]], float], arrays: list[np.ndarray], h: float = 1e-6
) -> list[np.ndarray]:
    """Central finite differences of f per coordinate of each array."""
    if h <= 0:
        raise ValueError("h must be positive")
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            fp = f(arrays)
            arr[idx] = orig - h
            fm = f(arrays)
            arr[idx] = orig
            g[idx] = (fp - fm) / (2.0 * h)
            it.iternext()
        grads.append(g)
    return grads


@dataclass
class AdamState:
    """ADAM moments plus hyperparameters; weight decay is decoupled.

    ``weight_decay`` is a scalar applied to every parameter, or a sequence
    with one coefficient per parameter array.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float | Sequence[float] = 0.0
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def init_like(cls, arrays: Sequence[np.ndarray], **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = [np.zeros_like(a, dtype=np.float64) for a in arrays]
        state.v = [np.zeros_like(a, dtype=np.float64) for a in arrays]
        if not np.isscalar(state.weight_decay) and len(state.weight_decay) != len(arrays):
            raise ValueError("per-parameter weight decay must match parameter count")
        return state

    def decay_for(self, index: int) -> float:
        if np.isscalar(self.weight_decay):
            return float(self.weight_decay)
        return float(self.weight_decay[index])


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One in-place ADAM update: decoupled decay first, then the moment step."""
    if len(params) != len(state.m):
        raise ValueError("parameter count does not match optimizer state")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient entry")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for i, (p, g, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        wd = state.decay_for(i)
        if wd:
            p *= 1.0 - state.lr * wd
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class TrainConfig:
    rng: RngStream
    max_epochs: int = 2000
    batch_size: int = 32
    patience: int = 50
    loss: str = "mse"
    val_metric: str = "loss"

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainHistory:
    records: list[EpochRecord]
    best_epoch: int

    @property
    def best_val_loss(self) -> float:
        return self.records[self.best_epoch].val_loss


def train_loop(
    params: list[np.ndarray],
    loss_grad: Callable[[list], tuple[float, list[np.ndarray]]],
    eval_loss: Callable[[list], float],
    train_data: Sequence,
    val_data: Sequence,
    cfg: TrainConfig,
    adam: AdamState,
    epoch_hook: Callable[[EpochRecord], None] | None = None,
) -> TrainHistory:
    """Minibatch ADAM with validation-based early stopping.

    Stops after ``cfg.patience`` epochs without validation improvement and
    restores the parameters of the best validation epoch.  ``loss_grad`` maps
    a batch (a list of samples) to (loss, grads aligned with ``params``);
    ``epoch_hook`` runs after each epoch with the current parameters live.
    """
    if not len(train_data):
        raise ValueError("empty training data")
    gen = cfg.rng.generator()
    records: list[EpochRecord] = []
    best_val = math.inf
    best_epoch = -1
    best_params = [p.copy() for p in params]
    since_best = 0
    for epoch in range(cfg.max_epochs):
        order = gen.permutation(len(train_data))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_data[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = loss_grad(batch)
            adam_step(adam, params, grads)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses))
        val_loss = eval_loss(list(val_data)) if len(val_data) else train_loss
        record = EpochRecord(epoch, train_loss, val_loss)
        records.append(record)
        if epoch_hook is not None:
            epoch_hook(record)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = [p.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    return TrainHistory(records, best_epoch)


def init_dense(
    dims: Sequence[int],
    rng: RngStream,
    activation: str = "relu",
    final_activation: str = "identity",
) -> DenseParams:
    """Fan-in uniform initialization: U(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer."""
    gen = rng.generator()
    layers = []
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        bound = 1.0 / math.sqrt(fan_in)
        w = gen.uniform(-bound, bound, size=(dims[i + 1], fan_in))
        b = gen.uniform(-bound, bound, size=dims[i + 1])
        act = final_activation if i == len(dims) - 2 else activation
        layers.append(DenseLayer(w, b, act))
    return DenseParams(layers)
