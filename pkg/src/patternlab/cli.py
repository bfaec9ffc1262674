"""Command-line entry point.

Subcommands:
  run              execute a recipe from a JSON config; writes metrics CSV
                   plus a resolved-config snapshot
  pattern-report   local-structure histograms of a dataset's size split and
                   their total-variation distance
  export-plotdata  aggregate a metrics CSV into tidy (x, mean, std) series
  verify           fast self-checks of the constructive builders and kernels

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .experiments.config import ConfigError, ExperimentConfig, parse_config, serialize_config
from .experiments.datasets import dataset_root, load_tudataset, size_split
from .experiments.engine import MetricsRecord, read_metrics_csv, write_metrics_csv
from .experiments.recipes import run_recipe
from .patterns import pattern_histogram, write_pattern_report
from .rng import RngStream

__all__ = ["main", "parse_config", "ExperimentConfig"]

# plots whose y axis is log10(loss)
_LOG10_PLOTS = {"fig4a", "fig4b", "fig4c", "fig4d", "fig7", "ssl_node"}


def _fail(msg: str, code: int) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_run(config_path: str, out_dir: str, threads: int, seed_offset: int | None) -> int:
    try:
        text = Path(config_path).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(f"cannot read config: {exc}", 2)
    try:
        cfg = parse_config(text)
        if seed_offset is not None:
            cfg.seed_offset = seed_offset
            cfg.provenance["seed_offset"] = "user"
            cfg.validate()
    except ConfigError as exc:
        return _fail(str(exc), 2)
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        return _fail(f"output path {out} exists and is not a directory", 2)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return _fail(f"output directory unusable: {exc}", 2)

    artifacts: dict = {}
    try:
        records = run_recipe(cfg.recipe, cfg, threads=threads, artifacts=artifacts)
    except Exception as exc:  # noqa: BLE001 - seed failures surface as exit 1
        return _fail(f"recipe failed: {exc}", 1)

    # snapshot first, then metrics; write via temp names so failures leave
    # no partial files behind
    snapshot = out / f"{cfg.recipe}.config.json"
    metrics = out / f"{cfg.recipe}.metrics.csv"
    tmp_snap = snapshot.with_suffix(".json.tmp")
    tmp_metrics = metrics.with_suffix(".csv.tmp")
    try:
        tmp_snap.write_text(serialize_config(cfg), encoding="utf-8")
        write_metrics_csv(tmp_metrics, records)
        tmp_snap.replace(snapshot)
        tmp_metrics.replace(metrics)
        manifest_rows = sorted(
            artifacts.get("fewshot_manifest", []),
            key=lambda r: (r["dataset"], r["seed"], r["k"], r["graph_index"]),
        )
        if manifest_rows:
            with open(out / f"{cfg.recipe}.fewshot.csv", "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["dataset", "seed", "k", "graph_index"])
                for row in manifest_rows:
                    writer.writerow([row["dataset"], row["seed"], row["k"], row["graph_index"]])
    except OSError as exc:
        for p in (tmp_snap, tmp_metrics):
            p.unlink(missing_ok=True)
        return _fail(f"cannot write outputs: {exc}", 1)
    print(f"wrote {metrics} ({len(records)} records)")
    return 0


def cmd_pattern_report(data_dir: str | None, name: str, depth: int, out_path: str, seed: int) -> int:
    root = dataset_root(data_dir)
    if root is None:
        return _fail("no dataset directory (pass --data-dir or set PATTERNLAB_DATA_DIR)", 2)
    try:
        ds = load_tudataset(root, name)
        split = size_split(ds, RngStream(seed))
        small = [ds.graphs[i] for i in split.train + split.val]
        large = [ds.graphs[i] for i in split.test]
        if not small or not large:
            return _fail("degenerate size split (no small or no large graphs)", 1)
        h_small = pattern_histogram(small, depth)
        h_large = pattern_histogram(large, depth)
        tv = write_pattern_report(out_path, h_small, h_large)
    except (OSError, ValueError) as exc:
        return _fail(f"pattern report for {name!r} failed: {exc}", 1)
    print(f"{name}: depth={depth} tv_distance={tv:.4f} -> {out_path}")
    return 0


def _best_epochs(records: list[MetricsRecord]) -> dict[tuple[str, int], int]:
    """Per (experiment, seed): the epoch with minimal validation loss."""
    best: dict[tuple[str, int], tuple[float, int]] = {}
    for r in records:
        if r.split != "val":
            continue
        key = (r.experiment, r.seed)
        if key not in best or (r.loss, r.epoch) < best[key]:
            best[key] = (r.loss, r.epoch)
    return {k: e for k, (_, e) in best.items()}


def cmd_export_plotdata(metrics_path: str, plot_id: str, out_path: str) -> int:
    try:
        records = read_metrics_csv(metrics_path)
    except (OSError, ValueError) as exc:
        return _fail(f"cannot read metrics: {exc}", 1)
    rows = [r for r in records if r.experiment.startswith(plot_id)]
    if not rows:
        return _fail(f"no records for plot {plot_id!r}", 1)
    best = _best_epochs(rows)
    series: dict[float, list[float]] = {}
    for r in rows:
        if not r.split.startswith("test@"):
            continue
        key = (r.experiment, r.seed)
        epochs_for_split = [
            q.epoch for q in rows if q.experiment == r.experiment and q.seed == r.seed and q.split == r.split
        ]
        chosen = best.get(key, max(epochs_for_split))
        if chosen not in epochs_for_split:
            chosen = max(epochs_for_split)
        if r.epoch != chosen:
            continue
        x = float(r.split.split("@", 1)[1])
        y = math.log10(r.loss) if plot_id in _LOG10_PLOTS and r.loss > 0 else r.loss
        series.setdefault(x, []).append(y)
    if not series:
        return _fail("metrics contain no test rows", 1)
    try:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "mean", "std"])
            for x in sorted(series):
                vals = np.array(series[x])
                writer.writerow([f"{x:g}", f"{vals.mean():.17g}", f"{vals.std():.17g}"])
    except OSError as exc:
        return _fail(f"cannot write plot data: {exc}", 1)
    print(f"wrote {out_path} ({len(series)} x points)")
    return 0


def cmd_verify() -> int:
    """Fast self-checks of the constructive builders and numeric kernels."""
    from .verify import run_all_checks

    ok = run_all_checks()
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="patternlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a recipe from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p_run.add_argument("--seed-offset", type=int, default=None)

    p_rep = sub.add_parser("pattern-report", help="size-split pattern histograms + TV")
    p_rep.add_argument("name")
    p_rep.add_argument("--data-dir", default=None)
    p_rep.add_argument("--depth", type=int, default=2)
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--seed", type=int, default=0)

    p_exp = sub.add_parser("export-plotdata", help="aggregate metrics into (x, mean, std)")
    p_exp.add_argument("metrics")
    p_exp.add_argument("plot_id")
    p_exp.add_argument("--out", required=True)

    sub.add_parser("verify", help="run fast construction/invariant self-checks")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out, args.threads, args.seed_offset)
    if args.command == "pattern-report":
        return cmd_pattern_report(args.data_dir, args.name, args.depth, args.out, args.seed)
    if args.command == "export-plotdata":
        return cmd_export_plotdata(args.metrics, args.plot_id, args.out)
    if args.command == "verify":
        return cmd_verify()
    return 2


if __name__ == "__main__":
    sys.exit(main())
