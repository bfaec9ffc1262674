"""patternlab: local-structure analysis and size-generalization experiments
for message-passing networks.

Subpackages/modules:
  graphs          graph container, multisets, seeded random-graph generators
  rng             counter-based random streams
  patterns        depth-d pattern refinement, histograms, unrolled trees
  neural          dense kernel: backprop, ADAM, early-stopping training
  gnn             first-order message-passing models and gradients
  constructions   exact hand-built networks and the linear edge-count analysis
  experiments     tasks, datasets, size splits, SSL protocols, recipes
  cli             command-line entry point
"""
from .graphs import Graph, Multiset, degree, gen_er, gen_geometric, gen_pa, new_graph
from .patterns import (
    PatternHistogram,
    PatternId,
    PatternTable,
    pattern_histogram,
    pattern_tree_descriptor,
    refine_patterns,
    tv_distance,
    unrolled_tree,
    worst_case_set,
)
from .rng import RngStream

__all__ = [
    "Graph",
    "Multiset",
    "RngStream",
    "degree",
    "gen_er",
    "gen_geometric",
    "gen_pa",
    "new_graph",
    "PatternHistogram",
    "PatternId",
    "PatternTable",
    "pattern_histogram",
    "pattern_tree_descriptor",
    "refine_patterns",
    "tv_distance",
    "unrolled_tree",
    "worst_case_set",
]

__version__ = "0.1.0"
