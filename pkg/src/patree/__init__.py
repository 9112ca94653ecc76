"""Graph construction from principal-axis trees plus label graphs, for SGC and GCN."""

from .core import EdgeSet, SparseAdjacency, from_edge_set, make_rng, spmm, to_edge_set
from .graphs import (
    GraphRecipe,
    LabelAssignment,
    Variant,
    build_graph,
    epsilon_graph,
    fuse,
    intrinsic_graph,
    knn_graph,
    pa_tree_graph,
    penalty_graph,
)
from .models import ModelParams, TrainConfig, gcn_fit, predict, sgc_fit, softmax_xent
from .propagation import NormalizedAdjacency, normalize, smooth
from .trees import PartitionTree, TreeConfig, build_pa_tree, build_rp_tree, leaves

__version__ = "0.1.0"
