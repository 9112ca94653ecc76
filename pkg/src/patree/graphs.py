"""Adjacency construction: tree leaves, penalty/intrinsic label graphs, baselines."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import EdgeSet, SparseAdjacency, as_feature_matrix
from .trees import PartitionTree, TreeConfig, build_forest, leaves


@dataclass(frozen=True, eq=False)
class LabelAssignment:
    """Ground-truth labels plus a train/valid/test split.

    ``y`` holds a class id per node, or -1 when unknown. Only ``y[train]`` is
    visible to graph construction and fitting; ``valid`` feeds early stopping and
    ``test`` is for scoring.
    """

    y: np.ndarray
    train: np.ndarray
    valid: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    test: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.int64))
        for name in ("train", "valid", "test"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64).ravel())
        n = self.n
        sets = [self.train, self.valid, self.test]
        for s in sets:
            if s.size and (s.min() < 0 or s.max() >= n):
                raise IndexError(f"split index out of range for n={n}")
            if np.unique(s).size != s.size:
                raise ValueError("duplicate index inside a split")
        allidx = np.concatenate(sets)
        if np.unique(allidx).size != allidx.size:
            raise ValueError("train/valid/test splits overlap")
        if np.any(self.y[self.train] < 0) or np.any(self.y[self.valid] < 0):
            raise ValueError("every train and valid node needs a label")

    @property
    def n(self) -> int:
        return int(self.y.size)


class Variant(str, enum.Enum):
    FULL = "full"  # (A_pa | A_i) - A_p
    INTRINSIC_ONLY = "intrinsic"
    PA_MINUS_PENALTY = "pa_minus_penalty"
    PA_ONLY = "pa"
    KNN = "knn"
    EPSILON = "epsilon"

    @property
    def supervised(self) -> bool:
        return self in (Variant.FULL, Variant.INTRINSIC_ONLY, Variant.PA_MINUS_PENALTY)


ABLATION_VARIANTS = (Variant.FULL, Variant.INTRINSIC_ONLY, Variant.PA_MINUS_PENALTY, Variant.PA_ONLY)


@dataclass(frozen=True)
class GraphRecipe:
    variant: Variant = Variant.FULL
    tree: TreeConfig = TreeConfig()
    forest_size: int = 1
    knn_k: int | None = None
    eps: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.forest_size < 1:
            raise ValueError("forest_size must be >= 1")
        if self.tree.kind == "pa" and self.forest_size != 1:
            raise ValueError("a PA tree is deterministic; forest_size must be 1")


def pa_tree_graph(trees: list[PartitionTree]) -> EdgeSet:
    """Union over trees of the leaf cliques."""
    if not trees:
        raise ValueError("need at least one tree")
    n = trees[0].n
    if any(t.n != n for t in trees):
        raise ValueError("trees were built over different node counts")
    return EdgeSet.from_cliques(n, (leaf for t in trees for leaf in leaves(t)))


def _train_classes(labels: LabelAssignment):
    idx = labels.train
    return idx, labels.y[idx]


def intrinsic_graph(labels: LabelAssignment) -> EdgeSet:
    """Edges between training nodes that share a class."""
    idx, y = _train_classes(labels)
    return EdgeSet.from_cliques(labels.n, (idx[y == c] for c in np.unique(y)))


def penalty_graph(labels: LabelAssignment) -> EdgeSet:
    """Edges between training nodes of different classes."""
    idx, y = _train_classes(labels)
    if idx.size < 2:
        return EdgeSet(labels.n)
    a, b = np.triu_indices(idx.size, k=1)
    diff = y[a] != y[b]
    return EdgeSet(labels.n, np.stack([idx[a[diff]], idx[b[diff]]], axis=1))


def fuse(a_pa: EdgeSet, a_i: EdgeSet, a_p: EdgeSet) -> EdgeSet:
    """Add intrinsic edges, then drop penalty edges (set semantics)."""
    return (a_pa | a_i) - a_p


def pairwise_distances(x: np.ndarray, block: int = 256) -> np.ndarray:
    """Dense Euclidean distance matrix from explicit differences (no Gram trick)."""
    n = x.shape[0]
    out = np.empty((n, n))
    for s in range(0, n, block):
        diff = x[s : s + block, None, :] - x[None, :, :]
        out[s : s + block] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return out


def default_knn_k(n: int) -> int:
    return max(1, int(round(math.log(n))))


def knn_graph(x, k: int | None = None) -> EdgeSet:
    """k-nn graph symmetrized by OR. Distance ties resolve to the lower index."""
    x = as_feature_matrix(x)
    n = x.shape[0]
    k = default_knn_k(n) if k is None else k
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    d = pairwise_distances(x)
    np.fill_diagonal(d, np.inf)
    nbrs = np.argsort(d, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    return EdgeSet(n, np.stack([rows, nbrs.ravel()], axis=1))


def mst_edges(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Prim's algorithm on a dense distance matrix.

    Returns ``(pairs, lengths)`` for the ``n - 1`` tree edges.
    """
    n = d.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    pairs, lengths = [], []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        pairs.append((int(parent[v]), v))
        lengths.append(float(best[v]))
        in_tree[v] = True
        closer = d[v] < best
        best = np.where(closer, d[v], best)
        parent = np.where(closer, v, parent)
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2), np.asarray(lengths)


def epsilon_graph(x, eps: float | None = None) -> EdgeSet:
    """All pairs within ``eps``; default ``eps`` is the longest Euclidean MST edge."""
    x = as_feature_matrix(x)
    n = x.shape[0]
    if n < 2:
        raise ValueError("epsilon graph needs at least two points")
    d = pairwise_distances(x)
    if eps is None:
        eps = float(mst_edges(d)[1].max())
    i, j = np.nonzero(np.triu(d <= eps, k=1))
    return EdgeSet(n, np.stack([i, j], axis=1))


def build_edges(x, labels: LabelAssignment, recipe: GraphRecipe, seed: int | None = None) -> EdgeSet:
    """Edge set for ``recipe``; ``seed`` overrides the tree seed when given."""
    x = as_feature_matrix(x)
    n = x.shape[0]
    if labels.n != n:
        raise ValueError(f"labels cover {labels.n} nodes but features have {n} rows")
    v = recipe.variant
    if v is Variant.KNN:
        return knn_graph(x, recipe.knn_k)
    if v is Variant.EPSILON:
        return epsilon_graph(x, recipe.eps)
    if v.supervised and labels.train.size == 0:
        raise ValueError(f"variant {v.value!r} uses training labels but the train split is empty")

    empty = EdgeSet(n)
    a_i = intrinsic_graph(labels) if v in (Variant.FULL, Variant.INTRINSIC_ONLY) else empty
    if v is Variant.INTRINSIC_ONLY:
        return a_i
    tree_cfg = recipe.tree
    if seed is not None:
        tree_cfg = replace(tree_cfg, seed=seed)
    a_pa = pa_tree_graph(build_forest(x, tree_cfg, recipe.forest_size))
    a_p = penalty_graph(labels) if v in (Variant.FULL, Variant.PA_MINUS_PENALTY) else empty
    return fuse(a_pa, a_i, a_p)


def build_graph(x, labels: LabelAssignment, recipe: GraphRecipe, seed: int | None = None) -> SparseAdjacency:
    edges = build_edges(x, labels, recipe, seed)
    return SparseAdjacency.from_edge_set(edges.n, edges)
