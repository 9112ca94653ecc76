"""Renormalized adjacency and K-step feature smoothing."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .core import SparseAdjacency


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """``D^-1/2 (A + I) D^-1/2`` kept as the self-looped base plus per-node scales."""

    base: SparseAdjacency
    scale: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        s = sp.diags(self.scale)
        return (s @ self.base.to_scipy() @ s).tocsr()

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: operator has {self.n} nodes, input has {x.shape[0]} rows")
        return np.asarray(self.matrix @ x)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize(adj: SparseAdjacency) -> NormalizedAdjacency:
    a = adj.to_scipy().tolil()
    a.setdiag(a.diagonal() + 1.0)
    a = a.tocsr()
    a.sort_indices()
    base = SparseAdjacency(adj.n, a.indptr.astype(np.int64), a.indices.astype(np.int64), a.data.astype(np.float64))
    deg = base.degrees()
    return NormalizedAdjacency(base, 1.0 / np.sqrt(deg))


def smooth(adj_bar: NormalizedAdjacency, x, k: int) -> np.ndarray:
    """``Abar^k x`` by ``k`` successive sparse products."""
    if k < 0:
        raise ValueError("k must be >= 0")
    out = np.array(x, dtype=np.float64, copy=True)
    if out.ndim != 2:
        raise ValueError("features must be 2-D")
    for _ in range(k):
        out = adj_bar.apply(out)
    return out
