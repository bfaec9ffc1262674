"""Experiment harness: task labeling, size splits, dataset ingestion,
self-supervised training protocols, and named experiment recipes."""
from .datasets import GraphDataset, SizeSplit, load_tudataset, size_split
from .engine import MetricsRecord, read_metrics_csv, write_metrics_csv
from .recipes import RECIPES, run_recipe
from .ssl import DescriptorScaler, SslProtocol, ssl_labels, train_ssl
from .tasks import Task, label, max_clique

__all__ = [
    "GraphDataset",
    "SizeSplit",
    "load_tudataset",
    "size_split",
    "MetricsRecord",
    "write_metrics_csv",
    "read_metrics_csv",
    "RECIPES",
    "run_recipe",
    "DescriptorScaler",
    "SslProtocol",
    "ssl_labels",
    "train_ssl",
    "Task",
    "label",
    "max_clique",
]
