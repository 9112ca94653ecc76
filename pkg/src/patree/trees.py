"""Principal-axis and random-projection trees.

Both trees split a point set at the (lower) median of its projections onto a
direction, recursing until a node holds at most ``n0`` points. Only the leaf
partition is used downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Union

import numpy as np

from .core import as_feature_matrix, make_rng


@dataclass(frozen=True)
class TreeConfig:
    n0: int = 20
    kind: Literal["pa", "rp"] = "pa"
    seed: int = 0
    power_iters: int = 100
    power_tol: float = 1e-9

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError(f"n0 must be >= 1, got {self.n0}")
        if self.kind not in ("pa", "rp"):
            raise ValueError(f"unknown tree kind {self.kind!r}")


@dataclass(frozen=True)
class Leaf:
    indices: np.ndarray


@dataclass(frozen=True)
class Split:
    direction: np.ndarray | None  # None for index-based fallback splits
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class PartitionTree:
    root: Node
    n: int
    config: TreeConfig

    def leaves(self) -> list[np.ndarray]:
        return leaves(self)

    def depth(self) -> int:
        def _d(node):
            return 0 if isinstance(node, Leaf) else 1 + max(_d(node.left), _d(node.right))

        return _d(self.root)


def principal_component(
    xs: np.ndarray, iters: int = 100, tol: float = 1e-9, seed: int = 0
) -> tuple[np.ndarray, float]:
    """Top eigenpair of the covariance of ``xs`` by power iteration.

    The covariance is applied implicitly as ``Xc^T (Xc v) / (m - 1)``. The start
    vector is all-ones; if that lands in the null space, or converges to an
    eigenvalue below the mean eigenvalue (which the top one can never be), the
    iteration is restarted from a seeded random vector.
    """
    xc = xs - xs.mean(axis=0)
    m, d = xc.shape
    denom = max(m - 1, 1)

    def cov(v):
        return xc.T @ (xc @ v) / denom

    mean_eig = float(np.einsum("ij,ij->", xc, xc)) / denom / d
    if mean_eig == 0.0:
        return np.ones(d) / math.sqrt(d), 0.0

    def run(v):
        v = v / np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = cov(v)
            nw = np.linalg.norm(w)
            if nw <= 1e-300:
                return v, 0.0
            w /= nw
            lam = float(w @ cov(w))
            done = np.linalg.norm(w - v) < tol
            v = w
            if done:
                break
        return v, lam

    v, lam = run(np.ones(d))
    if lam < mean_eig * (1 - 1e-9):
        v, lam = run(make_rng(seed).standard_normal(d))
    return v, lam


def _median_split(idx, proj):
    """Lower-median split; ties at the median go left."""
    m = idx.size
    order = np.argsort(proj, kind="stable")
    c = float(proj[order[(m + 1) // 2 - 1]])
    mask = proj <= c
    if mask.all():
        # every projection ties with the median: balanced split on rank order
        half = (m + 1) // 2
        mask = np.zeros(m, dtype=bool)
        mask[order[:half]] = True
    return c, idx[mask], idx[~mask]


def _build(x, idx, cfg: TreeConfig, direction_fn) -> Node:
    if idx.size <= cfg.n0:
        return Leaf(idx)
    xs = x[idx]
    if np.all(xs == xs[0]):
        # identical points: halve by index
        half = (idx.size + 1) // 2
        u, c, left, right = None, float("nan"), idx[:half], idx[half:]
    else:
        u = direction_fn(xs)
        c, left, right = _median_split(idx, xs @ u)
    return Split(u, c, _build(x, left, cfg, direction_fn), _build(x, right, cfg, direction_fn))


def build_pa_tree(x, cfg: TreeConfig = TreeConfig()) -> PartitionTree:
    """Principal-axis tree: split on the first principal component of each subset."""
    if cfg.kind != "pa":
        raise ValueError("build_pa_tree needs a config with kind='pa'")
    x = as_feature_matrix(x)

    def direction(xs):
        return principal_component(xs, cfg.power_iters, cfg.power_tol, cfg.seed)[0]

    root = _build(x, np.arange(x.shape[0]), cfg, direction)
    return PartitionTree(root, x.shape[0], cfg)


def build_rp_tree(x, cfg: TreeConfig) -> PartitionTree:
    """Random-projection tree: split on a uniformly random unit direction."""
    if cfg.kind != "rp":
        raise ValueError("build_rp_tree needs a config with kind='rp'")
    x = as_feature_matrix(x)
    rng = make_rng(cfg.seed)

    def direction(xs):
        r = rng.standard_normal(xs.shape[1])
        return r / np.linalg.norm(r)

    root = _build(x, np.arange(x.shape[0]), cfg, direction)
    return PartitionTree(root, x.shape[0], cfg)


def build_tree(x, cfg: TreeConfig) -> PartitionTree:
    return build_pa_tree(x, cfg) if cfg.kind == "pa" else build_rp_tree(x, cfg)


def build_forest(x, cfg: TreeConfig, size: int) -> list[PartitionTree]:
    """``size`` trees; RP trees get independent seeds spawned from ``cfg.seed``."""
    if size < 1:
        raise ValueError("forest size must be >= 1")
    if cfg.kind == "pa":
        if size != 1:
            raise ValueError("PA trees are deterministic; a PA forest must have size 1")
        return [build_pa_tree(x, cfg)]
    seeds = np.random.SeedSequence(cfg.seed).generate_state(size, dtype=np.uint64)
    return [build_rp_tree(x, replace(cfg, seed=int(s))) for s in seeds]


def leaves(tree: PartitionTree) -> list[np.ndarray]:
    """Leaf index arrays in left-to-right order."""
    out, stack = [], [tree.root]
    while stack:
        node = stack.pop()
        if isinstance(node, Leaf):
            out.append(node.indices)
        else:
            stack.append(node.right)
            stack.append(node.left)
    return out
