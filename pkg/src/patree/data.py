"""Dataset loading, synthetic generators, stratified splits and edge-list files."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import EdgeSet, SparseAdjacency, make_rng
from .graphs import LabelAssignment

log = logging.getLogger(__name__)

SYNTHETIC_KINDS = ("blobs", "two_moons", "rings", "smile")


class DataFormatError(ValueError):
    """Unreadable or malformed input file."""


@dataclass(frozen=True)
class DatasetSpec:
    source: str  # CSV path or one of SYNTHETIC_KINDS
    label_column: str | int = -1
    split_counts: tuple[int, int, int] = (50, 50, 200)
    split_seed: int = 0
    standardize: bool = False
    delimiter: str = ","
    n: int = 300  # synthetic only
    noise: float | None = None  # synthetic only; None = generator default
    n_classes: int | None = None  # synthetic only

    def __post_init__(self):
        if self.split_counts[0] < 1:
            raise ValueError("need at least one training node")
        if any(c < 0 for c in self.split_counts):
            raise ValueError("split counts must be non-negative")

    @property
    def is_synthetic(self) -> bool:
        return self.source in SYNTHETIC_KINDS


# -- CSV ----------------------------------------------------------------------


def read_csv(path, label_column: str | int = -1, delimiter: str = ",") -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Parse a headed CSV into ``(features, dense_labels, class_names)``.

    Labels are densified to ``0..C-1`` in sorted order of the raw label strings
    (numeric order when every label parses as a number).
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    if isinstance(label_column, str):
        if label_column not in header:
            raise DataFormatError(f"{path}: no column named {label_column!r}")
        lc = header.index(label_column)
    else:
        lc = label_column % len(header)

    feats, raw_labels, bad = [], [], []
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            bad.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        try:
            vals = [float(v) for k, v in enumerate(row) if k != lc]
        except ValueError:
            bad.append(f"line {lineno}: non-numeric feature")
            continue
        if not all(math.isfinite(v) for v in vals):
            bad.append(f"line {lineno}: non-finite feature")
            continue
        feats.append(vals)
        raw_labels.append(row[lc].strip())
    if bad:
        raise DataFormatError(f"{path}: " + "; ".join(bad[:20]) + (" ..." if len(bad) > 20 else ""))

    names = sorted(set(raw_labels))
    try:
        names = sorted(names, key=float)
    except ValueError:
        pass
    lookup = {name: i for i, name in enumerate(names)}
    y = np.array([lookup[v] for v in raw_labels], dtype=np.int64)
    return np.asarray(feats, dtype=np.float64), y, names


def write_csv(path, x: np.ndarray, y: np.ndarray) -> None:
    """Write features and integer labels; floats use ``repr`` so reads are exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(x.shape[1])] + ["label"])
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def standardize(x: np.ndarray) -> np.ndarray:
    """Column z-score (population std). Constant columns become 0."""
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    const = sd == 0
    if const.any():
        log.warning("standardize: %d constant column(s) set to 0", int(const.sum()))
    sd = np.where(const, 1.0, sd)
    return (x - mu) / sd


def load_csv(spec: DatasetSpec) -> tuple[np.ndarray, LabelAssignment]:
    x, y, _ = read_csv(spec.source, spec.label_column, spec.delimiter)
    if spec.standardize:
        x = standardize(x)
    return x, make_split(y, spec.split_counts, spec.split_seed)


def load_dataset(spec: DatasetSpec, seed: int | None = None) -> tuple[np.ndarray, LabelAssignment]:
    """Features and split for ``spec``; ``seed`` (when given) overrides the split seed.

    Synthetic data is always generated from ``spec.split_seed`` so that repeated
    runs vary only the split and the model initialisation.
    """
    split_seed = spec.split_seed if seed is None else seed
    if spec.is_synthetic:
        kw = {} if spec.noise is None else {"noise": spec.noise}
        if spec.n_classes is not None:
            kw["n_classes"] = spec.n_classes
        x, y = make_synthetic(spec.source, spec.n, seed=spec.split_seed, **kw)
    else:
        x, y, _ = read_csv(spec.source, spec.label_column, spec.delimiter)
    if spec.standardize:
        x = standardize(x)
    return x, make_split(y, spec.split_counts, split_seed)


# -- synthetic data -----------------------------------------------------------


def _class_sizes(n: int, c: int) -> np.ndarray:
    sizes = np.full(c, n // c)
    sizes[: n % c] += 1
    return sizes


def make_synthetic(kind: str, n: int, noise: float | None = None, seed: int = 0, n_classes: int | None = None):
    """2-D toy datasets, returned as ``(x, y)`` with rows in shuffled order.

    ``blobs``     isotropic Gaussians (std ``noise``, default 1.0) centred on a circle of radius 5
    ``rings``     concentric annuli of radius 1, 2, ...; radius jitter is N(0, noise^2), default 0.1
    ``two_moons`` interleaved half circles with N(0, noise^2) jitter, default 0.1
    ``smile``     two compact eyes plus an elongated mouth arc (3 classes), jitter default 0.05

    ``rings``, ``two_moons`` and the mouth of ``smile`` are sparse classes: their
    points do not gather around a single mean.
    """
    rng = make_rng(seed)
    if kind == "blobs":
        c = n_classes or 3
        s = 1.0 if noise is None else noise
        sizes = _class_sizes(n, c)
        ang = 2 * np.pi * np.arange(c) / c
        centers = 5.0 * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        y = np.repeat(np.arange(c), sizes)
        x = centers[y] + s * rng.standard_normal((n, 2))
    elif kind == "rings":
        c = n_classes or 2
        s = 0.1 if noise is None else noise
        sizes = _class_sizes(n, c)
        y = np.repeat(np.arange(c), sizes)
        r = (y + 1.0) + s * rng.standard_normal(n)
        t = rng.uniform(0, 2 * np.pi, n)
        x = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    elif kind == "two_moons":
        s = 0.1 if noise is None else noise
        sizes = _class_sizes(n, 2)
        y = np.repeat(np.arange(2), sizes)
        t = rng.uniform(0, np.pi, n)
        x = np.where(
            (y == 0)[:, None],
            np.stack([np.cos(t), np.sin(t)], axis=1),
            np.stack([1 - np.cos(t), 0.5 - np.sin(t)], axis=1),
        )
        x = x + s * rng.standard_normal((n, 2))
    elif kind == "smile":
        s = 0.05 if noise is None else noise
        sizes = _class_sizes(n, 4)
        # eyes share class 0 and 1; mouth (class 2) gets the remaining two quarters
        sizes = np.array([sizes[0], sizes[1], sizes[2] + sizes[3]])
        y = np.repeat(np.arange(3), sizes)
        x = np.empty((n, 2))
        x[y == 0] = [-0.5, 0.5]
        x[y == 1] = [0.5, 0.5]
        t = rng.uniform(np.pi * 1.15, np.pi * 1.85, sizes[2])
        x[y == 2] = np.stack([np.cos(t), 0.2 + 0.8 * np.sin(t)], axis=1)
        x = x + s * rng.standard_normal((n, 2)) * np.where(y == 2, 1.0, 2.0)[:, None]
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if n < 2 * len(sizes):
        raise ValueError(f"need n >= 2 * classes, got n={n}")
    perm = rng.permutation(n)
    return x[perm], y[perm]


# -- splits -------------------------------------------------------------------


def _apportion(total: int, avail: np.ndarray, rng) -> np.ndarray:
    """Largest-remainder allocation of ``total`` proportional to ``avail``."""
    pool = int(avail.sum())
    exact = total * avail / pool if pool else np.zeros_like(avail, dtype=float)
    take = np.floor(exact).astype(np.int64)
    short = total - int(take.sum())
    if short:
        frac = exact - take
        tiebreak = rng.permutation(avail.size)
        order = np.lexsort((tiebreak, -frac))
        order = [k for k in order if frac[k] > 0][:short]
        take[order] += 1
    return take


def make_split(y, counts: tuple[int, int, int], seed: int = 0) -> LabelAssignment:
    """Stratified train/valid/test split of exactly ``counts`` nodes.

    Each set draws from every class in proportion to what is still unassigned
    (largest remainder, ties broken by the seed). Leftover nodes stay unsplit.
    """
    y = np.asarray(y, dtype=np.int64)
    n = y.size
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or any(c < 0 for c in counts):
        raise ValueError(f"split counts must be three non-negative integers, got {counts}")
    if sum(counts) > n:
        raise ValueError(f"split counts {counts} sum to {sum(counts)} > n={n}")
    rng = make_rng(seed)
    classes = np.unique(y)
    pools = [list(rng.permutation(np.flatnonzero(y == c))) for c in classes]
    sets = []
    for total in counts:
        avail = np.array([len(p) for p in pools])
        take = _apportion(total, avail, rng)
        chosen = []
        for k, t in enumerate(take):
            chosen.extend(pools[k][:t])
            pools[k] = pools[k][t:]
        sets.append(np.sort(np.asarray(chosen, dtype=np.int64)))
    return LabelAssignment(y, *sets)


# -- edge lists ---------------------------------------------------------------

_HEADER = re.compile(r"#\s*n\s*=\s*(\d+)")


def load_ground_truth_graph(path, n: int | None = None) -> SparseAdjacency:
    """Read a 0-based edge list (whitespace or comma separated).

    A ``# n=<count>`` line fixes the node count; otherwise ``n`` or the largest
    index + 1 is used. Pairs are symmetrized and deduplicated; self-loops are
    dropped and counted in the log.
    """
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: no such file")
    pairs, declared = [], n
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            m = _HEADER.match(s)
            if m and declared is None:
                declared = int(m.group(1))
            continue
        parts = s.replace(",", " ").split()
        if len(parts) < 2:
            raise DataFormatError(f"{path}: line {lineno}: expected an index pair")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            if not pairs and lineno == 1:
                continue  # textual header row
            raise DataFormatError(f"{path}: line {lineno}: non-integer index") from None
        pairs.append((i, j))
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if declared is None:
        declared = int(arr.max()) + 1 if arr.size else 0
    if arr.size and (arr.min() < 0 or arr.max() >= declared):
        raise DataFormatError(f"{path}: index out of range for n={declared}")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        log.warning("%s: dropped %d self-loop(s)", path, int(loops.sum()))
    edges = EdgeSet(declared, arr[~loops])
    log.info("%s: %d entries -> %d undirected edges", path, len(arr), len(edges))
    return SparseAdjacency.from_edge_set(declared, edges)


def save_edge_list(path, edges: EdgeSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={edges.n}\n")
        for i, j in edges.pairs:
            fh.write(f"{i} {j}\n")


# -- key/value config files ----------------------------------------------------


def read_kv(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; later keys override earlier."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise DataFormatError(f"{path}: line {lineno}: expected 'key = value'")
        k, v = s.split("=", 1)
        out[k.strip()] = v.strip()
    return out
