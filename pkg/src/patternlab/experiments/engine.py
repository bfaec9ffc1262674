"""Metrics records and their CSV interchange format."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = ["MetricsRecord", "write_metrics_csv", "read_metrics_csv", "METRICS_HEADER"]

METRICS_HEADER = ["experiment", "seed", "split", "epoch", "loss", "accuracy", "wall_ms"]


@dataclass(frozen=True)
class MetricsRecord:
    """One measured point: a (seed, split, epoch) cell of one experiment."""

    experiment: str
    seed: int
    split: str
    epoch: int
    loss: float
    accuracy: float | None = None
    wall_ms: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.loss):
            raise ValueError(f"non-finite loss in record {self}")
        if self.accuracy is not None and not math.isfinite(self.accuracy):
            raise ValueError("non-finite accuracy")


def write_metrics_csv(path, records: Sequence[MetricsRecord]) -> None:
    keys = set()
    for r in records:
        k = (r.seed, r.split, r.epoch, r.experiment)
        if k in keys:
            raise ValueError(f"duplicate record for {k}")
        keys.add(k)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.experiment,
                    r.seed,
                    r.split,
                    r.epoch,
                    f"{r.loss:.17g}",
                    "" if r.accuracy is None else f"{r.accuracy:.17g}",
                    f"{r.wall_ms:.17g}",
                ]
            )


def read_metrics_csv(path) -> list[MetricsRecord]:
    out: list[MetricsRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {header}")
        for row in reader:
            out.append(
                MetricsRecord(
                    experiment=row[0],
                    seed=int(row[1]),
                    split=row[2],
                    epoch=int(row[3]),
                    loss=float(row[4]),
                    accuracy=None if row[5] == "" else float(row[5]),
                    wall_ms=float(row[6]),
                )
            )
    return out
