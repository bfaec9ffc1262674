"""Self-supervised pretext task on unrolled-tree descriptors, plus the
pretraining and multitask protocols that consume it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..gnn import (
    GnnModel,
    evaluate_loss,
    gnn_loss_and_grad,
    param_arrays,
    select_param_indices,
)
from ..graphs import Graph
from ..neural import AdamState, EpochRecord, TrainConfig, TrainHistory, adam_step, train_loop
from ..patterns import descriptor_matrix

__all__ = [
    "SslProtocol",
    "DescriptorScaler",
    "descriptor_targets",
    "fit_descriptor_scaler",
    "ssl_labels",
    "train_ssl",
    "SslTrainResult",
]

# the pretext task is always a regression on descriptors
_SSL_LOSS = "mse"


@dataclass(frozen=True)
class SslProtocol:
    """How the pretext task participates in training.

    mode "none" is plain supervised training; "pretrain" learns trunk + SSL
    head first and then fits the main head on a frozen trunk; "multitask"
    mixes both losses with weight alpha on the SSL term.  With few-shot
    target examples present, multitask weights all three losses 1/3 and the
    pretrain second phase weights main and few-shot 1/2 each.
    """

    mode: str = "none"
    alpha: float = 0.5
    depth: int = 3

    def __post_init__(self):
        if self.mode not in ("none", "pretrain", "multitask"):
            raise ValueError(f"unknown ssl mode {self.mode!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.depth < 1:
            raise ValueError("ssl depth must be at least 1")


def descriptor_targets(g: Graph, d: int) -> np.ndarray:
    """Raw per-node tree descriptors flattened to (num_nodes, (d+1)*num_classes)."""
    if d < 1:
        raise ValueError("descriptor depth must be at least 1")
    return descriptor_matrix(g, d).reshape(g.num_nodes, -1).astype(np.float64)


@dataclass(frozen=True)
class DescriptorScaler:
    """Per-coordinate standardization fitted on training graphs only.

    Coordinates with zero variance are dropped; transform and
    inverse_transform are exact inverses on the kept coordinates.
    """

    depth: int
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray  # bool mask over raw coordinates

    @property
    def out_dim(self) -> int:
        return int(self.keep.sum())

    def transform(self, g: Graph) -> np.ndarray:
        raw = descriptor_targets(g, self.depth)
        return (raw[:, self.keep] - self.mean[self.keep]) / self.std[self.keep]

    def inverse_transform(self, standardized: np.ndarray) -> np.ndarray:
        return standardized * self.std[self.keep] + self.mean[self.keep]


def fit_descriptor_scaler(graphs: Sequence[Graph], d: int) -> DescriptorScaler:
    if not graphs:
        raise ValueError("need at least one graph to fit the scaler")
    rows = np.concatenate([descriptor_targets(g, d) for g in graphs])
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    keep = std > 1e-12
    if not keep.any():
        raise ValueError("all descriptor coordinates are constant")
    return DescriptorScaler(d, mean, std, keep)


def ssl_labels(g: Graph, d: int, scaler: DescriptorScaler | None = None) -> np.ndarray:
    """Per-node pretext targets: flattened descriptors, standardized when a
    fitted scaler is supplied (raw otherwise)."""
    if scaler is None:
        return descriptor_targets(g, d)
    if scaler.depth != d:
        raise ValueError("scaler depth mismatch")
    return scaler.transform(g)


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------


_select = select_param_indices


@dataclass
class SslTrainResult:
    model: GnnModel
    phase_histories: dict[str, TrainHistory]
    mixed_components: list[dict[str, float]] = field(default_factory=list)


def _run_phase(
    model: GnnModel,
    items,
    val_items,
    head: str,
    loss_tag: str,
    cfg: TrainConfig,
    adam_hyper: dict,
    selection: list[int],
) -> TrainHistory:
    arrays = param_arrays(model)
    params = [arrays[i] for i in selection]

    def loss_grad(batch):
        loss, grads = gnn_loss_and_grad(model, batch, head, loss_tag)
        return loss, [grads[i] for i in selection]

    def eval_fn(items_):
        return evaluate_loss(model, items_, head, loss_tag)

    adam = AdamState.init_like(params, **adam_hyper)
    return train_loop(params, loss_grad, eval_fn, items, val_items, cfg, adam)


def _cycle_batch(items, order, step: int, batch_size: int):
    return [
        items[order[(step * batch_size + j) % len(items)]]
        for j in range(min(batch_size, len(items)))
    ]


def _run_multitask(
    model: GnnModel,
    main_train,
    main_val,
    ssl_train,
    cfg: TrainConfig,
    adam_hyper: dict,
    weights: dict[str, float],
    fewshot=None,
) -> tuple[TrainHistory, list[dict[str, float]]]:
    """Joint loop: each step draws one batch per loss and mixes gradients.

    The realized step loss is exactly the weighted sum of the component
    losses; components are recorded for auditability.  Early stopping
    watches the main-task validation loss.
    """
    selection = _select(model, True, ["main", "ssl"])
    arrays = param_arrays(model)
    params = [arrays[i] for i in selection]
    adam = AdamState.init_like(params, **adam_hyper)
    gen = cfg.rng.generator()
    records: list[EpochRecord] = []
    components: list[dict[str, float]] = []
    best_val, best_epoch, since_best = math.inf, -1, 0
    best_params = [p.copy() for p in params]

    sources: list[tuple[str, str, str, float, list]] = [
        ("main", "main", cfg.loss, weights["main"], list(main_train)),
        ("ssl", "ssl", _SSL_LOSS, weights["ssl"], list(ssl_train)),
    ]
    if fewshot:
        sources.append(("fewshot", "main", cfg.loss, weights["fewshot"], list(fewshot)))

    steps = max(1, math.ceil(len(main_train) / cfg.batch_size))
    for epoch in range(cfg.max_epochs):
        orders = [gen.permutation(len(items)) for *_, items in sources]
        epoch_losses = []
        for step in range(steps):
            total = 0.0
            mixed: list[np.ndarray] | None = None
            parts: dict[str, float] = {}
            for (tag, head, loss_tag, weight, items), order in zip(sources, orders):
                batch = _cycle_batch(items, order, step, cfg.batch_size)
                loss, grads = gnn_loss_and_grad(model, batch, head, loss_tag)
                picked = [grads[i] for i in selection]
                if mixed is None:
                    mixed = [weight * g for g in picked]
                else:
                    for acc, g in zip(mixed, picked):
                        acc += weight * g
                total += weight * loss
                parts[tag] = loss
            adam_step(adam, params, mixed)
            parts["total"] = total
            components.append(parts)
            epoch_losses.append(total)
        val_loss = evaluate_loss(model, main_val, "main", cfg.loss)
        records.append(EpochRecord(epoch, float(np.mean(epoch_losses)), val_loss))
        if val_loss < best_val:
            best_val, best_epoch, since_best = val_loss, epoch, 0
            best_params = [p.copy() for p in params]
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    return TrainHistory(records, best_epoch), components


def _run_frozen_main_with_fewshot(
    model: GnnModel, main_train, main_val, fewshot, cfg: TrainConfig, adam_hyper: dict
) -> TrainHistory:
    """Pretrain phase two with few-shot data: 1/2 main + 1/2 few-shot, head only."""
    selection = _select(model, False, ["main"])
    arrays = param_arrays(model)
    params = [arrays[i] for i in selection]
    adam = AdamState.init_like(params, **adam_hyper)
    gen = cfg.rng.generator()
    records: list[EpochRecord] = []
    best_val, best_epoch, since_best = math.inf, -1, 0
    best_params = [p.copy() for p in params]
    main_items, few_items = list(main_train), list(fewshot)
    steps = max(1, math.ceil(len(main_items) / cfg.batch_size))
    for epoch in range(cfg.max_epochs):
        order_main = gen.permutation(len(main_items))
        order_few = gen.permutation(len(few_items))
        losses = []
        for step in range(steps):
            batch_m = _cycle_batch(main_items, order_main, step, cfg.batch_size)
            batch_f = _cycle_batch(few_items, order_few, step, cfg.batch_size)
            loss_m, grads_m = gnn_loss_and_grad(model, batch_m, "main", cfg.loss)
            loss_f, grads_f = gnn_loss_and_grad(model, batch_f, "main", cfg.loss)
            mixed = [0.5 * grads_m[i] + 0.5 * grads_f[i] for i in selection]
            adam_step(adam, params, mixed)
            losses.append(0.5 * loss_m + 0.5 * loss_f)
        val_loss = evaluate_loss(model, main_val, "main", cfg.loss)
        records.append(EpochRecord(epoch, float(np.mean(losses)), val_loss))
        if val_loss < best_val:
            best_val, best_epoch, since_best = val_loss, epoch, 0
            best_params = [p.copy() for p in params]
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    return TrainHistory(records, best_epoch)


def train_ssl(
    model: GnnModel,
    protocol: SslProtocol,
    main_train,
    main_val,
    cfg: TrainConfig,
    adam_hyper: dict | None = None,
    ssl_train=None,
    ssl_val=None,
    fewshot=None,
    phase2_cfg: TrainConfig | None = None,
) -> SslTrainResult:
    """Train a model under the chosen protocol, mutating it in place.

    The pretext items pair graphs with per-node descriptor targets and must
    span both source and target domains; phase timing comes from ``cfg``
    (and ``phase2_cfg`` for the frozen-trunk phase, which may run for zero
    epochs to keep the pretrained trunk untouched).
    """
    adam_hyper = dict(adam_hyper or {})
    if protocol.mode == "none":
        hist = _run_phase(
            model, main_train, main_val, "main", cfg.loss, cfg, adam_hyper,
            _select(model, True, ["main"]),
        )
        return SslTrainResult(model, {"main": hist})
    if ssl_train is None:
        raise ValueError(f"protocol {protocol.mode!r} requires ssl data")
    if protocol.mode == "pretrain":
        hist1 = _run_phase(
            model,
            ssl_train,
            ssl_val if ssl_val is not None else [],
            "ssl",
            _SSL_LOSS,
            cfg,
            adam_hyper,
            _select(model, True, ["ssl"]),
        )
        cfg2 = phase2_cfg if phase2_cfg is not None else cfg
        histories = {"ssl": hist1}
        if cfg2.max_epochs > 0:
            if fewshot:
                histories["main"] = _run_frozen_main_with_fewshot(
                    model, main_train, main_val, fewshot, cfg2, adam_hyper
                )
            else:
                histories["main"] = _run_phase(
                    model,
                    main_train,
                    main_val,
                    "main",
                    cfg2.loss,
                    cfg2,
                    adam_hyper,
                    _select(model, False, ["main"]),
                )
        return SslTrainResult(model, histories)
    if fewshot:
        weights = {"main": 1.0 / 3.0, "ssl": 1.0 / 3.0, "fewshot": 1.0 / 3.0}
    else:
        weights = {"main": 1.0 - protocol.alpha, "ssl": protocol.alpha}
    hist, components = _run_multitask(
        model, main_train, main_val, ssl_train, cfg, adam_hyper, weights, fewshot
    )
    return SslTrainResult(model, {"multitask": hist}, components)
