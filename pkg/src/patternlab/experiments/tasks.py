"""Task definitions and label oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gnn import GnnModel, gnn_forward
from ..graphs import Graph

__all__ = ["Task", "TASK_TAGS", "label", "max_clique", "MAX_CLIQUE_NODE_LIMIT"]

TASK_TAGS = (
    "edge_count",
    "node_degree",
    "teacher_student_graph",
    "teacher_student_node",
    "max_clique",
    "dataset_classification",
)

MAX_CLIQUE_NODE_LIMIT = 60


@dataclass
class Task:
    tag: str
    teacher: GnnModel | None = None
    loss: str = "mse"

    def __post_init__(self):
        if self.tag not in TASK_TAGS:
            raise ValueError(f"unknown task tag {self.tag!r}")
        needs_teacher = self.tag.startswith("teacher_student")
        if needs_teacher and self.teacher is None:
            raise ValueError(f"task {self.tag!r} requires a teacher model")
        if not needs_teacher and self.teacher is not None:
            raise ValueError(f"task {self.tag!r} must not carry a teacher")

    @property
    def node_level(self) -> bool:
        return self.tag in ("node_degree", "teacher_student_node")


def label(task: Task, g: Graph):
    """Ground-truth label: a scalar for graph tasks, a per-node vector otherwise.

    Teacher-student labels re-run the frozen teacher; max-clique labels come
    from the exact solver (guarded to small graphs).
    """
    if task.tag == "edge_count":
        return float(g.num_edges)
    if task.tag == "node_degree":
        return g.degrees.astype(np.float64).reshape(-1, 1)
    if task.tag == "teacher_student_graph":
        return np.asarray(gnn_forward(task.teacher, g), dtype=np.float64)
    if task.tag == "teacher_student_node":
        return np.asarray(gnn_forward(task.teacher, g), dtype=np.float64)
    if task.tag == "max_clique":
        return float(max_clique(g))
    raise ValueError(f"task {task.tag!r} labels come from the dataset, not this oracle")


def max_clique(g: Graph) -> int:
    """Exact clique number via branch and bound with a greedy coloring bound."""
    n = g.num_nodes
    if n > MAX_CLIQUE_NODE_LIMIT:
        raise ValueError(f"graph has {n} nodes, exceeds solver guard {MAX_CLIQUE_NODE_LIMIT}")
    if n == 0:
        return 0
    adj = [0] * n
    for v, nbrs in enumerate(g.adjacency):
        for u in nbrs:
            adj[v] |= 1 << u
    # degeneracy-style static order: repeatedly peel the min-degree vertex
    order: list[int] = []
    remaining = (1 << n) - 1
    degs = {v: len(g.adjacency[v]) for v in range(n)}
    alive = set(range(n))
    while alive:
        v = min(alive, key=lambda u: (degs[u], u))
        order.append(v)
        alive.discard(v)
        for u in g.adjacency[v]:
            if u in alive:
                degs[u] -= 1
    rank = {v: i for i, v in enumerate(order)}
    best = [0]

    def greedy_color_bound(cand: int) -> int:
        colors = 0
        while cand:
            colors += 1
            avail = cand
            while avail:
                v = (avail & -avail).bit_length() - 1
                avail &= ~((1 << v) | adj[v])
                cand &= ~(1 << v)
        return colors

    def expand(cand: int, size: int) -> None:
        if not cand:
            best[0] = max(best[0], size)
            return
        if size + greedy_color_bound(cand) <= best[0]:
            return
        # branch on candidates in reverse peel order (high-connectivity first)
        verts = []
        c = cand
        while c:
            v = (c & -c).bit_length() - 1
            verts.append(v)
            c &= c - 1
        verts.sort(key=lambda v: -rank[v])
        for v in verts:
            if size + bin(cand).count("1") <= best[0]:
                return
            expand(cand & adj[v], size + 1)
            cand &= ~(1 << v)

    expand((1 << n) - 1, 0)
    return best[0]
