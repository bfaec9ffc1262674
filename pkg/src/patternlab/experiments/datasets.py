"""Graph-classification datasets: the on-disk text format and size splits."""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..graphs import Graph, new_graph
from ..rng import RngStream

__all__ = ["GraphDataset", "SizeSplit", "load_tudataset", "size_split"]


@dataclass(frozen=True)
class GraphDataset:
    name: str
    graphs: tuple[Graph, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.graphs) != len(self.labels):
            raise ValueError("graphs/labels length mismatch")

    def sizes(self) -> list[int]:
        return [g.num_nodes for g in self.graphs]


@dataclass(frozen=True)
class SizeSplit:
    """Disjoint id sets: train/val from the smallest graphs, test from the largest.

    Membership follows size percentiles with ties included (everything at or
    below the median size is small; everything at or above the 90th
    percentile size is large), ordering by (size, original index).  Ids that
    would land in both pools stay in the small pool.
    """

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        seen = set(self.train) | set(self.val) | set(self.test)
        if len(seen) != len(self.train) + len(self.val) + len(self.test):
            raise ValueError("split ids overlap")


def size_split(dataset: GraphDataset | Sequence[int], rng: RngStream) -> SizeSplit:
    """Small-50% / large-10% protocol with a random 10% validation slice.

    Accepts a dataset or a bare size list.  The validation ids are sampled
    from the small pool with the given stream, so identical (dataset, seed)
    give identical splits.
    """
    sizes = dataset.sizes() if isinstance(dataset, GraphDataset) else list(dataset)
    n = len(sizes)
    if n < 10:
        raise ValueError(f"dataset too small to split: {n} graphs")
    order = sorted(range(n), key=lambda i: (sizes[i], i))
    small_cut = sizes[order[(n - 1) // 2]]
    large_cut = sizes[order[n - max(1, n // 10)]]
    pool = [i for i in range(n) if sizes[i] <= small_cut]
    test = tuple(i for i in range(n) if sizes[i] >= large_cut and sizes[i] > small_cut)
    k_val = int(round(0.1 * len(pool)))
    perm = rng.split("val-slice").generator().permutation(len(pool))
    val_ids = {pool[j] for j in perm[:k_val]}
    train = tuple(i for i in pool if i not in val_ids)
    return SizeSplit(train, tuple(sorted(val_ids)), test)


def _read_int_lines(path: Path) -> list[int]:
    with open(path, "r", encoding="utf-8") as fh:
        return [int(line.strip()) for line in fh if line.strip()]


def load_tudataset(directory, name: str) -> GraphDataset:
    """Read the standard four-file graph-classification text layout.

    ``{name}_A.txt`` holds comma-separated 1-indexed directed edge pairs,
    ``{name}_graph_indicator.txt`` one 1-indexed graph id per node,
    ``{name}_graph_labels.txt`` one integer per graph, and the optional
    ``{name}_node_labels.txt`` one integer per node (absent means a single
    feature class).  Directed duplicates merge into undirected edges.
    """
    root = Path(directory)
    if (root / name).is_dir():
        root = root / name
    adj_path = root / f"{name}_A.txt"
    ind_path = root / f"{name}_graph_indicator.txt"
    lab_path = root / f"{name}_graph_labels.txt"
    node_lab_path = root / f"{name}_node_labels.txt"
    for p in (adj_path, ind_path, lab_path):
        if not p.is_file():
            raise FileNotFoundError(f"missing mandatory dataset file: {p}")

    indicator = _read_int_lines(ind_path)
    num_nodes_total = len(indicator)
    graph_ids = sorted(set(indicator))
    if graph_ids != list(range(1, len(graph_ids) + 1)):
        raise ValueError("graph indicator ids are not contiguous from 1")
    labels = _read_int_lines(lab_path)
    if len(labels) != len(graph_ids):
        raise ValueError("graph label count does not match graph count")

    if node_lab_path.is_file():
        raw_node_labels = _read_int_lines(node_lab_path)
        if len(raw_node_labels) != num_nodes_total:
            raise ValueError("node label count does not match node count")
        classes = sorted(set(raw_node_labels))
        class_of = {c: k for k, c in enumerate(classes)}
        node_classes = [class_of[c] for c in raw_node_labels]
        num_classes = len(classes)
    else:
        node_classes = [0] * num_nodes_total
        num_classes = 1

    # global node id -> (graph index, local node id)
    local: list[tuple[int, int]] = []
    counts = [0] * len(graph_ids)
    for gid in indicator:
        local.append((gid - 1, counts[gid - 1]))
        counts[gid - 1] += 1

    edges_per_graph: list[list[tuple[int, int]]] = [[] for _ in graph_ids]
    with open(adj_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u_str, v_str = line.split(",")
            u, v = int(u_str), int(v_str)
            if not (1 <= u <= num_nodes_total and 1 <= v <= num_nodes_total):
                raise ValueError(f"dangling node index in edge ({u},{v})")
            gu, lu = local[u - 1]
            gv, lv = local[v - 1]
            if gu != gv:
                raise ValueError(f"edge ({u},{v}) crosses graphs {gu + 1} and {gv + 1}")
            if lu != lv:
                edges_per_graph[gu].append((lu, lv))

    graphs = []
    features_per_graph: list[list[int]] = [[] for _ in graph_ids]
    for node, (gid, _) in enumerate(local):
        features_per_graph[gid].append(node_classes[node])
    for gid in range(len(graph_ids)):
        graphs.append(
            new_graph(counts[gid], edges_per_graph[gid], features_per_graph[gid], num_classes)
        )
    return GraphDataset(name, tuple(graphs), tuple(labels))


def dataset_root(explicit: str | None = None) -> Path | None:
    """Dataset directory: an explicit path or the PATTERNLAB_DATA_DIR fallback."""
    if explicit:
        return Path(explicit)
    env = os.environ.get("PATTERNLAB_DATA_DIR")
    return Path(env) if env else None
