"""Numeric building blocks: feature matrices, edge sets, sparse symmetric adjacency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp


def make_rng(seed: int | None) -> np.random.Generator:
    """Seeded generator used everywhere in the package.

    numpy's PCG64 bit generator; identical seeds give identical streams on every
    platform numpy supports.
    """
    return np.random.Generator(np.random.PCG64(seed))


def as_feature_matrix(x) -> np.ndarray:
    """Validate and convert to a C-contiguous float64 ``(n, d)`` array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"feature matrix needs n >= 1 and d >= 1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("feature matrix contains NaN or Inf")
    return x


class EdgeSet:
    """Undirected, unweighted edges over ``n`` nodes.

    Each pair ``{i, j}`` (i != j) is stored once as ``i < j``, encoded in a sorted
    int64 key array ``i * n + j`` so that union and difference are sorted merges.
    """

    __slots__ = ("n", "_keys")

    def __init__(self, n: int, pairs=None):
        self.n = int(n)
        if pairs is None:
            self._keys = np.empty(0, dtype=np.int64)
            return
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if p.size and (p.min() < 0 or p.max() >= self.n):
            bad = p[(p < 0).any(axis=1) | (p >= self.n).any(axis=1)][0]
            raise IndexError(f"edge {tuple(bad)} out of range for n={self.n}")
        if np.any(p[:, 0] == p[:, 1]):
            raise ValueError("self-pairs are not edges")
        lo = np.minimum(p[:, 0], p[:, 1])
        hi = np.maximum(p[:, 0], p[:, 1])
        self._keys = np.unique(lo * self.n + hi)

    @classmethod
    def _from_keys(cls, n: int, keys: np.ndarray) -> "EdgeSet":
        out = cls(n)
        out._keys = keys
        return out

    @classmethod
    def from_cliques(cls, n: int, groups: Iterable[np.ndarray]) -> "EdgeSet":
        """All pairs inside each group (groups need not be disjoint)."""
        chunks = []
        for g in groups:
            g = np.unique(np.asarray(g, dtype=np.int64))
            if g.size < 2:
                continue
            a, b = np.triu_indices(g.size, k=1)
            chunks.append(g[a] * n + g[b])
        if not chunks:
            return cls(n)
        return cls._from_keys(n, np.unique(np.concatenate(chunks)))

    @property
    def keys(self) -> np.ndarray:
        return self._keys

    @property
    def pairs(self) -> np.ndarray:
        """``(m, 2)`` array of ``(i, j)`` with ``i < j``, sorted."""
        return np.stack([self._keys // self.n, self._keys % self.n], axis=1)

    def __len__(self) -> int:
        return int(self._keys.size)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for i, j in self.pairs:
            yield int(i), int(j)

    def __contains__(self, pair) -> bool:
        i, j = pair
        if i == j:
            return False
        i, j = min(i, j), max(i, j)
        k = i * self.n + j
        pos = np.searchsorted(self._keys, k)
        return bool(pos < self._keys.size and self._keys[pos] == k)

    def _check(self, other: "EdgeSet") -> None:
        if other.n != self.n:
            raise ValueError(f"edge sets over different node counts: {self.n} vs {other.n}")

    def __or__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet._from_keys(self.n, np.union1d(self._keys, other._keys))

    def __sub__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet._from_keys(
            self.n, np.setdiff1d(self._keys, other._keys, assume_unique=True)
        )

    def __and__(self, other: "EdgeSet") -> "EdgeSet":
        self._check(other)
        return EdgeSet._from_keys(
            self.n, np.intersect1d(self._keys, other._keys, assume_unique=True)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._keys, other._keys)

    def as_set(self) -> set[tuple[int, int]]:
        return set(iter(self))

    def __repr__(self) -> str:
        return f"EdgeSet(n={self.n}, edges={len(self)})"


@dataclass(frozen=True, eq=False)
class SparseAdjacency:
    """Symmetric adjacency in compressed-row form.

    Row ``i`` holds the sorted neighbours ``indices[indptr[i]:indptr[i+1]]`` with
    matching ``weights``. Instances are treated as immutable.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_edge_set(cls, n: int, edges: EdgeSet | Iterable[tuple[int, int]]) -> "SparseAdjacency":
        if not isinstance(edges, EdgeSet):
            edges = EdgeSet(n, list(edges))
        elif edges.n != n:
            raise ValueError(f"edge set is over {edges.n} nodes, expected {n}")
        p = edges.pairs
        rows = np.concatenate([p[:, 0], p[:, 1]])
        cols = np.concatenate([p[:, 1], p[:, 0]])
        return cls.from_coo(n, rows, cols, np.ones(rows.size))

    @classmethod
    def from_coo(cls, n: int, rows, cols, weights) -> "SparseAdjacency":
        """Build from (already symmetric) coordinate triples; duplicates are summed."""
        m = sp.csr_matrix(
            (np.asarray(weights, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
            shape=(n, n),
        )
        m.sum_duplicates()
        m.sort_indices()
        return cls(n, m.indptr.astype(np.int64), m.indices.astype(np.int64), m.data.copy())

    @classmethod
    def from_dense(cls, a) -> "SparseAdjacency":
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls.from_coo(a.shape[0], r, c, a[r, c])

    def to_edge_set(self) -> EdgeSet:
        r = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = r < self.indices
        return EdgeSet._from_keys(self.n, np.unique(r[keep] * self.n + self.indices[keep]))

    @property
    def rows(self) -> list[list[int]]:
        return [self.indices[self.indptr[i] : self.indptr[i + 1]].tolist() for i in range(self.n)]

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def degrees(self) -> np.ndarray:
        r = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return np.bincount(r, weights=self.weights, minlength=self.n)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def check(self) -> None:
        """Raise ``ValueError`` unless the symmetry/uniqueness/range invariants hold."""
        if self.indptr.size != self.n + 1 or self.indptr[0] != 0 or self.indptr[-1] != self.indices.size:
            raise ValueError("malformed indptr")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.n):
            raise ValueError("neighbour index out of range")
        if np.any(self.weights < 0):
            raise ValueError("negative edge weight")
        for i in range(self.n):
            row = self.indices[self.indptr[i] : self.indptr[i + 1]]
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"row {i} is unsorted or has duplicate neighbours")
        m = self.to_scipy()
        if (m != m.T).nnz:
            raise ValueError("adjacency is not symmetric")

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseAdjacency):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"SparseAdjacency(n={self.n}, edges={self.nnz // 2})"


def from_edge_set(n: int, edges: EdgeSet) -> SparseAdjacency:
    return SparseAdjacency.from_edge_set(n, edges)


def to_edge_set(adj: SparseAdjacency) -> EdgeSet:
    return adj.to_edge_set()


def spmm(adj: SparseAdjacency, x) -> np.ndarray:
    """``Y[i] = sum_j w_ij * x[j]`` over the neighbours of ``i``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != adj.n:
        raise ValueError(
            f"dimension mismatch: adjacency has {adj.n} nodes, features have shape {x.shape}"
        )
    return np.asarray(adj.to_scipy() @ x)
