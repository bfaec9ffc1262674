"""Named experiment presets.

Each recipe generates synthetic data per seed, trains a student network, and
emits one MetricsRecord per (seed, split, epoch).  Sweeps over a test-side
variable x land in split tags "test@x"; sweeps over a training-side variable
get their own experiment id so epochs never collide.  Seeds may run in
parallel on disjoint random streams; record order is by seed regardless.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from ..gnn import (
    GnnModel,
    build_student,
    evaluate_loss,
    gnn_loss_and_grad,
    param_arrays,
    sample_teacher,
    select_param_indices,
)
from ..graphs import Graph, gen_er, gen_geometric, gen_pa
from ..neural import AdamState, TrainConfig, train_loop
from ..rng import RngStream
from .config import ExperimentConfig, RECIPE_DEFAULTS, parse_config
from .engine import MetricsRecord
from .ssl import SslProtocol, fit_descriptor_scaler, ssl_labels, train_ssl
from .tasks import Task, label

__all__ = ["run_recipe", "RECIPES"]


def _er_set(count: int, lo: int, hi: int, p: float, stream: RngStream) -> list[Graph]:
    sizes = stream.split("sizes").generator().integers(lo, hi + 1, size=count)
    return [gen_er(int(n), p, stream.split(f"g{i}")) for i, n in enumerate(sizes)]


def _pa_set(count: int, lo: int, hi: int, m: int, stream: RngStream) -> list[Graph]:
    sizes = stream.split("sizes").generator().integers(max(lo, m + 1), hi + 1, size=count)
    return [gen_pa(int(n), m, stream.split(f"g{i}")) for i, n in enumerate(sizes)]


def _geo_set(count: int, lo: int, hi: int, rho: float, stream: RngStream) -> list[Graph]:
    sizes = stream.split("sizes").generator().integers(lo, hi + 1, size=count)
    return [gen_geometric(int(n), rho, stream.split(f"g{i}")) for i, n in enumerate(sizes)]


def _items(task: Task, graphs: Sequence[Graph]):
    return [(g, label(task, g)) for g in graphs]


def _teacher(cfg: ExperimentConfig, stream: RngStream, readout: str) -> GnnModel:
    dims = [1] + [cfg.teacher_width] * cfg.depth
    suffix = [cfg.teacher_width, cfg.teacher_width, 1]
    return sample_teacher(dims, suffix, stream.split("teacher"), readout, cfg.activation)


def _make_task(cfg: ExperimentConfig, tag: str, stream: RngStream) -> Task:
    if tag == "teacher_student_graph":
        return Task(tag, teacher=_teacher(cfg, stream, "sum"))
    if tag == "teacher_student_node":
        return Task(tag, teacher=_teacher(cfg, stream, "none"))
    return Task(tag)


def _train_supervised(
    cfg: ExperimentConfig,
    seed: int,
    experiment: str,
    task: Task,
    train_graphs: Sequence[Graph],
    val_graphs: Sequence[Graph],
    test_sets: Sequence[tuple[float, Sequence[Graph]]],
    stream: RngStream,
) -> list[MetricsRecord]:
    readout = "none" if task.node_level else "sum"
    model = build_student(
        1, cfg.student_width, cfg.depth, 1, stream.split("init"), readout, cfg.activation
    )
    train_items = _items(task, train_graphs)
    val_items = _items(task, val_graphs)
    test_items = [(x, _items(task, graphs)) for x, graphs in test_sets]
    selection = select_param_indices(model)
    arrays = param_arrays(model)
    params = [arrays[i] for i in selection]

    def loss_grad(batch):
        loss, grads = gnn_loss_and_grad(model, batch, "main", task.loss)
        return loss, [grads[i] for i in selection]

    def eval_fn(items_):
        return evaluate_loss(model, items_, "main", task.loss)

    train_cfg = TrainConfig(
        rng=stream.split("batches"),
        max_epochs=cfg.max_epochs,
        batch_size=cfg.batch_size,
        patience=cfg.patience,
        loss=task.loss,
    )
    adam = AdamState.init_like(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    records: list[MetricsRecord] = []
    t0 = time.perf_counter()

    def hook(rec):
        wall = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
        records.append(MetricsRecord(experiment, seed, "train", rec.epoch, rec.train_loss, None, wall))
        records.append(MetricsRecord(experiment, seed, "val", rec.epoch, rec.val_loss, None, wall))
        for x, items_ in test_items:
            records.append(
                MetricsRecord(
                    experiment, seed, f"test@{x:g}", rec.epoch, eval_fn(items_), None, wall
                )
            )

    train_loop(params, loss_grad, eval_fn, train_items, val_items, train_cfg, adam, hook)
    return records


# ---------------------------------------------------------------------------
# recipe runners (one seed each)
# ---------------------------------------------------------------------------


def _seed_fig4(cfg: ExperimentConfig, seed: int, variant: str) -> list[MetricsRecord]:
    stream = RngStream(seed)
    task = _make_task(cfg, "teacher_student_graph", stream)
    n_ref = 0.5 * (cfg.n_train_min + cfg.n_train_max)
    train = _er_set(cfg.train_graphs, cfg.n_train_min, cfg.n_train_max, cfg.p, stream.split("train"))
    val = _er_set(cfg.val_graphs, cfg.n_train_min, cfg.n_train_max, cfg.p, stream.split("val"))
    if variant == "a":
        tests = [
            (x, _er_set(cfg.test_graphs, int(x), int(x), cfg.p, stream.split(f"test{x}")))
            for x in cfg.test_sizes
        ]
        return _train_supervised(cfg, seed, "fig4a", task, train, val, tests, stream)
    if variant == "b":
        tests = []
        for x in cfg.test_sizes:
            p_x = min(1.0, cfg.p * n_ref / x)  # keep expected degree n*p at its training value
            tests.append(
                (x, _er_set(cfg.test_graphs, int(x), int(x), p_x, stream.split(f"test{x}")))
            )
        return _train_supervised(cfg, seed, "fig4b", task, train, val, tests, stream)
    if variant == "d":
        n_test = int(cfg.test_sizes[0])
        tests = [
            (p_x, _er_set(cfg.test_graphs, n_test, n_test, p_x, stream.split(f"test{p_x}")))
            for p_x in cfg.test_ps
        ]
        return _train_supervised(cfg, seed, "fig4d", task, train, val, tests, stream)
    raise ValueError(variant)


def _seed_fig4c(cfg: ExperimentConfig, seed: int) -> list[MetricsRecord]:
    stream = RngStream(seed)
    task = _make_task(cfg, "teacher_student_graph", stream)
    n_test = int(cfg.test_sizes[0])
    records: list[MetricsRecord] = []
    for x in cfg.train_max_sweep:
        sub = stream.split(f"upper{x}")
        train = _er_set(cfg.train_graphs, cfg.n_train_min, int(x), cfg.p, sub.split("train"))
        val = _er_set(cfg.val_graphs, cfg.n_train_min, int(x), cfg.p, sub.split("val"))
        tests = [(x, _er_set(cfg.test_graphs, n_test, n_test, cfg.p, sub.split("test")))]
        records += _train_supervised(
            cfg, seed, f"fig4c[max={x:g}]", task, train, val, tests, sub
        )
    return records


def _seed_fig7(cfg: ExperimentConfig, seed: int) -> list[MetricsRecord]:
    stream = RngStream(seed)
    task = Task("edge_count")
    train = _pa_set(cfg.train_graphs, cfg.n_train_min, cfg.n_train_max, cfg.m, stream.split("train"))
    val = _pa_set(cfg.val_graphs, cfg.n_train_min, cfg.n_train_max, cfg.m, stream.split("val"))
    tests = [
        (x, _pa_set(cfg.test_graphs, int(x), int(x), cfg.m, stream.split(f"test{x}")))
        for x in cfg.test_sizes
    ]
    return _train_supervised(cfg, seed, "fig7", task, train, val, tests, stream)


def _seed_table2(cfg: ExperimentConfig, seed: int) -> list[MetricsRecord]:
    # labels need the exact solver, which guards at 60 nodes; test sizes stay
    # at that bound instead of the density-doubling size
    stream = RngStream(seed)
    task = Task("max_clique")
    train = _geo_set(cfg.train_graphs, cfg.n_train_min, cfg.n_train_max, cfg.rho, stream.split("train"))
    val = _geo_set(cfg.val_graphs, cfg.n_train_min, cfg.n_train_max, cfg.rho, stream.split("val"))
    n_test = int(cfg.test_sizes[0])
    tests = []
    for ratio in cfg.rho_ratios:
        tests.append(
            (
                ratio,
                _geo_set(cfg.test_graphs, n_test, n_test, cfg.rho / ratio, stream.split(f"test{ratio}")),
            )
        )
    return _train_supervised(cfg, seed, "table2", task, train, val, tests, stream)


_TABLE3_TASKS = ("teacher_student_node", "node_degree", "teacher_student_graph", "edge_count")


def _seed_table3(cfg: ExperimentConfig, seed: int) -> list[MetricsRecord]:
    stream = RngStream(seed)
    n_test = int(cfg.test_sizes[0])
    records: list[MetricsRecord] = []
    for tag in _TABLE3_TASKS:
        sub = stream.split(tag)
        task = _make_task(cfg, tag, sub)
        train = _er_set(cfg.train_graphs, cfg.n_train_min, cfg.n_train_max, cfg.p, sub.split("train"))
        val = _er_set(cfg.val_graphs, cfg.n_train_min, cfg.n_train_max, cfg.p, sub.split("val"))
        tests = [
            (p_x, _er_set(cfg.test_graphs, n_test, n_test, p_x, sub.split(f"test{p_x}")))
            for p_x in cfg.test_ps
        ]
        records += _train_supervised(cfg, seed, f"table3:{tag}", task, train, val, tests, sub)
    return records


def _seed_table4(cfg: ExperimentConfig, seed: int) -> list[MetricsRecord]:
    stream = RngStream(seed)
    task = _make_task(cfg, "teacher_student_graph", stream)
    records: list[MetricsRecord] = []
    for lo, hi in cfg.train_ranges:
        sub = stream.split(f"range{lo}-{hi}")
        train = _er_set(cfg.train_graphs, lo, hi, cfg.p, sub.split("train"))
        val = _er_set(cfg.val_graphs, lo, hi, cfg.p, sub.split("val"))
        tests = [
            (x, _er_set(cfg.test_graphs, int(x), int(x), cfg.p, sub.split(f"test{x}")))
            for x in cfg.test_sizes
        ]
        records += _train_supervised(
            cfg, seed, f"table4[{lo}-{hi}]", task, train, val, tests, sub
        )
    return records


def _seed_ssl_node(
    cfg: ExperimentConfig, seed: int, artifacts: dict | None
) -> list[MetricsRecord]:
    """Teacher-student node task; source small graphs, target large graphs.

    The pretext data spans source and target domains.  Arms share the seed's
    teacher, data, and student initialization, so they differ only in
    protocol.
    """
    stream = RngStream(seed)
    task = _make_task(cfg, "teacher_student_node", stream)
    n_test = int(cfg.test_sizes[0])
    train = _er_set(cfg.train_graphs, cfg.n_train_min, cfg.n_train_max, cfg.p, stream.split("train"))
    val = _er_set(cfg.val_graphs, cfg.n_train_min, cfg.n_train_max, cfg.p, stream.split("val"))
    test = _er_set(cfg.test_graphs, n_test, n_test, cfg.p, stream.split("test"))
    target_pool = _er_set(cfg.ssl_target_graphs, n_test, n_test, cfg.p, stream.split("target"))

    ssl_graphs = list(train) + list(target_pool)
    scaler = fit_descriptor_scaler(ssl_graphs, cfg.ssl_depth)
    ssl_items = [(g, ssl_labels(g, cfg.ssl_depth, scaler)) for g in ssl_graphs]
    n_ssl_val = max(1, len(ssl_items) // 10)
    ssl_val = ssl_items[-n_ssl_val:]
    ssl_train = ssl_items[:-n_ssl_val]

    main_train = _items(task, train)
    main_val = _items(task, val)
    test_items = _items(task, test)

    fewshot_ks = cfg.fewshot_k or [0]
    records: list[MetricsRecord] = []
    for mode in cfg.ssl_modes:
        for k in fewshot_ks:
            arm = f"ssl_node:{mode}" + (f"[k={k}]" if len(fewshot_ks) > 1 or k else "")
            fewshot = None
            if k:
                gen = stream.split(f"fewshot{k}").generator()
                picked = sorted(gen.permutation(len(target_pool))[:k].tolist())
                fewshot = _items(task, [target_pool[i] for i in picked])
                if artifacts is not None:
                    artifacts.setdefault("fewshot_manifest", []).extend(
                        {"dataset": "er_target", "seed": seed, "k": k, "graph_index": i}
                        for i in picked
                    )
            model = build_student(
                1,
                cfg.student_width,
                cfg.depth,
                1,
                stream.split("init"),
                "none",
                cfg.activation,
                heads={"main": 1, "ssl": scaler.out_dim},
            )
            protocol = SslProtocol(mode, cfg.ssl_alpha, cfg.ssl_depth)
            train_cfg = TrainConfig(
                rng=stream.split(f"batches-{mode}-{k}"),
                max_epochs=cfg.max_epochs,
                batch_size=cfg.batch_size,
                patience=cfg.patience,
                loss=task.loss,
            )
            t0 = time.perf_counter()
            result = train_ssl(
                model,
                protocol,
                main_train,
                main_val,
                train_cfg,
                {"lr": cfg.lr, "weight_decay": cfg.weight_decay},
                ssl_train=ssl_train if mode != "none" else None,
                ssl_val=ssl_val if mode != "none" else None,
                fewshot=fewshot,
            )
            wall = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
            phase_split = {"ssl": ("ssl_train", "ssl_val"), "main": ("train", "val"),
                           "multitask": ("train", "val")}
            main_hist = None
            for phase, hist in result.phase_histories.items():
                tr_tag, va_tag = phase_split[phase]
                for rec in hist.records:
                    records.append(
                        MetricsRecord(arm, seed, tr_tag, rec.epoch, rec.train_loss, None, wall)
                    )
                    records.append(
                        MetricsRecord(arm, seed, va_tag, rec.epoch, rec.val_loss, None, wall)
                    )
                if phase in ("main", "multitask"):
                    main_hist = hist
            if main_hist is None:
                main_hist = result.phase_histories["ssl"]
            test_loss = evaluate_loss(model, test_items, "main", task.loss)
            records.append(
                MetricsRecord(
                    arm, seed, f"test@{n_test:g}", max(0, main_hist.best_epoch), test_loss, None, wall
                )
            )
    return records


RECIPES: dict[str, Callable[[ExperimentConfig, int, dict | None], list[MetricsRecord]]] = {
    "fig4a": lambda cfg, seed, art: _seed_fig4(cfg, seed, "a"),
    "fig4b": lambda cfg, seed, art: _seed_fig4(cfg, seed, "b"),
    "fig4c": lambda cfg, seed, art: _seed_fig4c(cfg, seed),
    "fig4d": lambda cfg, seed, art: _seed_fig4(cfg, seed, "d"),
    "fig7": lambda cfg, seed, art: _seed_fig7(cfg, seed),
    "table2": lambda cfg, seed, art: _seed_table2(cfg, seed),
    "table3": lambda cfg, seed, art: _seed_table3(cfg, seed),
    "table4": lambda cfg, seed, art: _seed_table4(cfg, seed),
    "ssl_node": _seed_ssl_node,
}


def run_recipe(
    recipe_id: str,
    overrides: dict | ExperimentConfig | None = None,
    threads: int = 1,
    artifacts: dict | None = None,
) -> list[MetricsRecord]:
    """Run every seed of a recipe and return its records in seed order.

    ``overrides`` may be a partial dict of config fields or a full
    ExperimentConfig; seeds run on disjoint random streams and may execute in
    parallel without changing the output.
    """
    if recipe_id not in RECIPES:
        raise ValueError(f"unknown recipe {recipe_id!r}; known: {sorted(RECIPES)}")
    if isinstance(overrides, ExperimentConfig):
        cfg = overrides
        cfg.validate()
    else:
        import json

        payload = dict(overrides or {})
        payload["recipe"] = recipe_id
        cfg = parse_config(json.dumps(payload))
    runner = RECIPES[recipe_id]
    seeds = [cfg.seed_offset + i for i in range(cfg.seeds)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda s: runner(cfg, s, artifacts), seeds))
    else:
        chunks = [runner(cfg, s, artifacts) for s in seeds]
    records: list[MetricsRecord] = []
    for chunk in chunks:
        records.extend(chunk)
    return records
