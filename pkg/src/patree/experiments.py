"""Metrics, the k-nn baseline and the manifest-driven experiment runner."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import EdgeSet, SparseAdjacency
from .data import SYNTHETIC_KINDS, DatasetSpec, load_dataset, load_ground_truth_graph, read_kv
from .graphs import ABLATION_VARIANTS, GraphRecipe, LabelAssignment, Variant, build_edges, epsilon_graph, knn_graph
from .models import TrainConfig, gcn_fit_normalized, gcn_forward, sgc_fit_smoothed
from .propagation import normalize, smooth
from .trees import TreeConfig

log = logging.getLogger(__name__)

PROTOCOLS = ("accuracy", "smoothing", "forest", "ablation", "confusion", "knn")
MODELS = ("sgc", "gcn")


class ManifestError(ValueError):
    """Manifest is malformed or describes an infeasible experiment."""


# -- metrics ------------------------------------------------------------------


def accuracy(pred, labels, subset) -> float:
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("accuracy over an empty subset")
    pred, labels = np.asarray(pred), np.asarray(labels)
    return float(np.mean(pred[subset] == labels[subset]))


@dataclass(frozen=True)
class AdjacencyConfusion:
    """Pair counts comparing a constructed graph with a ground-truth graph.

    ``tn``: no edge in either; ``fn``: truth edge the constructed graph missed;
    ``fp``: constructed edge absent from the truth; ``tp``: edge in both.
    """

    tn: int
    fn: int
    fp: int
    tp: int

    @property
    def total(self) -> int:
        return self.tn + self.fn + self.fp + self.tp

    @property
    def removal_rate(self) -> float:
        """Share of ground-truth non-edges that the constructed graph also leaves out."""
        d = self.tn + self.fp
        return self.tn / d if d else 1.0

    @property
    def hit_rate(self) -> float:
        """Share of ground-truth edges that the constructed graph recovers."""
        d = self.tp + self.fn
        return self.tp / d if d else 1.0


def adjacency_confusion(constructed: EdgeSet, truth: EdgeSet, n: int | None = None) -> AdjacencyConfusion:
    n = constructed.n if n is None else n
    if constructed.n != n or truth.n != n:
        raise ValueError(f"edge sets over {constructed.n} and {truth.n} nodes, expected {n}")
    tp = len(constructed & truth)
    fp = len(constructed) - tp
    fn = len(truth) - tp
    return AdjacencyConfusion(n * (n - 1) // 2 - tp - fp - fn, fn, fp, tp)


def knn_classify(x_train, y_train, x_query, k: int = 5) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows.

    Equal distances resolve to the lower training index; tied votes to the lowest class id.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    x_query = np.asarray(x_query, dtype=np.float64)
    y_train = np.asarray(y_train)
    if not 1 <= k <= len(x_train):
        raise ValueError(f"need 1 <= k <= {len(x_train)}, got {k}")
    classes, y_enc = np.unique(y_train, return_inverse=True)
    out = np.empty(len(x_query), dtype=np.int64)
    for s in range(0, len(x_query), 256):
        diff = x_query[s : s + 256, None, :] - x_train[None, :, :]
        d = np.einsum("ijk,ijk->ij", diff, diff)
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
        votes = np.zeros((nn.shape[0], classes.size), dtype=np.int64)
        np.add.at(votes, (np.arange(nn.shape[0])[:, None], y_enc[nn]), 1)
        out[s : s + 256] = votes.argmax(axis=1)
    return classes[out]


# -- manifest -----------------------------------------------------------------


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(" ", "").split(",") if v)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt(conv):
    return lambda s: None if s.strip().lower() in ("", "none") else conv(s)


@dataclass(frozen=True)
class Manifest:
    """Everything an experiment depends on. See README for the file format."""

    protocol: str = "accuracy"
    dataset: str = "blobs"
    n: int = 300
    noise: float | None = None
    n_classes: int | None = None
    label_column: str = "-1"
    delimiter: str = ","
    standardize: bool = False
    split: tuple[int, ...] = (50, 50, 200)
    data_seed: int = 0
    variant: str = "full"
    tree: str = "pa"
    n0: int = 20
    forest_size: int = 1
    knn_k: int | None = None
    eps: float | None = None
    models: tuple[str, ...] = ("sgc", "gcn")
    epochs: int = 200
    learning_rate: float = 0.2
    weight_decay: float = 5e-4
    hidden_width: int = 16
    k_layers: int = 2
    momentum: float = 0.0
    patience: int | None = None
    bias: bool = True
    runs: int = 10
    seed: int = 0
    workers: int = 1
    k_values: tuple[int, ...] = (1, 2, 5, 10, 20, 50)
    forest_sizes: tuple[int, ...] = (20, 40, 60, 80, 100)
    ground_truth: str | None = None
    classifier_k: int = 5
    plots: bool = True

    _PARSERS = {
        "n": int,
        "noise": _opt(float),
        "n_classes": _opt(int),
        "standardize": _bool,
        "split": _ints,
        "data_seed": int,
        "n0": int,
        "forest_size": int,
        "knn_k": _opt(int),
        "eps": _opt(float),
        "models": lambda s: tuple(m.strip() for m in s.split(",") if m.strip()),
        "epochs": int,
        "learning_rate": float,
        "weight_decay": float,
        "hidden_width": int,
        "k_layers": int,
        "momentum": float,
        "patience": _opt(int),
        "bias": _bool,
        "runs": int,
        "seed": int,
        "workers": int,
        "k_values": _ints,
        "forest_sizes": _ints,
        "ground_truth": _opt(str),
        "classifier_k": int,
        "plots": _bool,
    }

    @classmethod
    def from_dict(cls, kv: dict[str, str]) -> "Manifest":
        known = {f.name for f in fields(cls)}
        unknown = set(kv) - known
        if unknown:
            raise ManifestError(f"unknown manifest key(s): {', '.join(sorted(unknown))}")
        values = {}
        for k, v in kv.items():
            try:
                values[k] = cls._PARSERS.get(k, str)(v)
            except ValueError as exc:
                raise ManifestError(f"bad value for {k!r}: {v!r} ({exc})") from None
        m = cls(**values)
        m.validate()
        return m

    @classmethod
    def from_file(cls, path, overrides: dict[str, str] | None = None) -> "Manifest":
        kv = read_kv(path) if path else {}
        kv.update(overrides or {})
        return cls.from_dict(kv)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        err = []
        if self.protocol not in PROTOCOLS:
            err.append(f"protocol must be one of {PROTOCOLS}")
        bad_models = [m for m in self.models if m not in MODELS]
        if bad_models or not self.models:
            err.append(f"models must be a non-empty subset of {MODELS}")
        if len(self.split) != 3 or self.split[0] < 1 or min(self.split) < 0:
            err.append("split must be train,valid,test with train >= 1")
        try:
            Variant(self.variant)
        except ValueError:
            err.append(f"variant must be one of {[v.value for v in Variant]}")
        if self.tree not in ("pa", "rp"):
            err.append("tree must be pa or rp")
        if self.tree == "pa" and self.forest_size != 1:
            err.append("forest_size must be 1 for a PA tree")
        if self.n0 < 1 or self.forest_size < 1:
            err.append("n0 and forest_size must be >= 1")
        if self.runs < 1 or self.workers < 1:
            err.append("runs and workers must be >= 1")
        if self.epochs < 1 or self.learning_rate <= 0:
            err.append("epochs must be >= 1 and learning_rate > 0")
        if self.k_layers < 0 or (self.k_layers < 1 and "gcn" in self.models and self.protocol != "smoothing"):
            err.append("k_layers must be >= 1 when training a GCN")
        if self.protocol == "smoothing":
            if not self.k_values or min(self.k_values) < 0:
                err.append("k_values must be non-negative")
            if "gcn" in self.models and 0 in self.k_values:
                err.append("a GCN needs at least one layer; drop 0 from k_values")
        if self.protocol == "forest" and (not self.forest_sizes or min(self.forest_sizes) < 1):
            err.append("forest_sizes must be >= 1")
        if self.protocol == "confusion":
            if not self.ground_truth:
                err.append("confusion protocol needs ground_truth = <edge list path>")
            elif not Path(self.ground_truth).exists():
                err.append(f"ground_truth file {self.ground_truth} not found")
        if self.protocol == "knn" and self.classifier_k > self.split[0]:
            err.append("classifier_k exceeds the training split size")
        if not _is_synthetic(self.dataset) and not Path(self.dataset).exists():
            err.append(f"dataset {self.dataset!r} is neither a synthetic kind nor an existing file")
        if _is_synthetic(self.dataset) and sum(self.split) > self.n:
            err.append(f"split {self.split} needs more than n={self.n} nodes")
        if err:
            raise ManifestError("; ".join(err))

    def dataset_spec(self) -> DatasetSpec:
        lc: str | int = self.label_column
        try:
            lc = int(lc)
        except ValueError:
            pass
        return DatasetSpec(
            self.dataset, lc, tuple(self.split), self.data_seed, self.standardize,
            self.delimiter, self.n, self.noise, self.n_classes,
        )

    def recipe(self, variant: str | Variant | None = None, tree: str | None = None, forest_size: int | None = None) -> GraphRecipe:
        return GraphRecipe(
            Variant(variant or self.variant),
            TreeConfig(n0=self.n0, kind=tree or self.tree),
            forest_size or self.forest_size,
            self.knn_k,
            self.eps,
        )

    def train_config(self, k_layers: int | None = None, seed: int = 0) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            hidden_width=self.hidden_width,
            k_layers=self.k_layers if k_layers is None else k_layers,
            seed=seed,
            patience=self.patience,
            momentum=self.momentum,
            bias=self.bias,
        )


def _is_synthetic(name: str) -> bool:
    return name in SYNTHETIC_KINDS


# -- runs ---------------------------------------------------------------------


@dataclass
class CellResult:
    cell: str
    model: str
    variant: str
    k_layers: int
    forest_size: int
    accuracy: float
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class RunReport:
    manifest: Manifest
    runs: dict[str, list[tuple[int, CellResult]]]  # cell -> [(seed, result)]
    extra: list[dict] = field(default_factory=list)  # e.g. confusion rows

    def summary(self) -> list[dict]:
        out = []
        for cell, rows in self.runs.items():
            accs = np.array([r.accuracy for _, r in rows])
            first = rows[0][1]
            out.append(
                {
                    "cell": cell,
                    "model": first.model,
                    "variant": first.variant,
                    "k_layers": first.k_layers,
                    "forest_size": first.forest_size,
                    "runs": len(rows),
                    "mean": float(accs.mean()),
                    "std": float(accs.std()),
                }
            )
        return out

    def mean(self, cell: str) -> float:
        return float(np.mean([r.accuracy for _, r in self.runs[cell]]))


def _clock() -> float:
    return time.perf_counter()


def _fit_eval(model, x, abar, xbar, labels: LabelAssignment, cfg: TrainConfig, y) -> tuple[float, object, dict]:
    t0 = _clock()
    if model == "sgc":
        params = sgc_fit_smoothed(xbar, labels, cfg)
        t1 = _clock()
        out = xbar @ params.weights[0]
        if params.biases is not None:
            out = out + params.biases[0]
    else:
        params = gcn_fit_normalized(x, abar, labels, cfg)
        t1 = _clock()
        out = gcn_forward(params, abar, x)[0]
    pred = params.classes[np.argmax(out, axis=1)]
    test = labels.test if labels.test.size else np.setdiff1d(np.arange(len(y)), labels.train)
    return accuracy(pred, y, test), params, {"train": t1 - t0}


def _model_cells(m: Manifest, x, y, labels, edges: EdgeSet, seed: int, tag: str, k_list, variant: str, forest_size: int):
    """Train every requested model for each K in ``k_list`` on one graph."""
    out = []
    t0 = _clock()
    abar = normalize(SparseAdjacency.from_edge_set(edges.n, edges))
    t_norm = _clock() - t0
    xbar, done_k, t_pre = x.copy(), 0, 0.0
    for k in sorted(k_list):
        t0 = _clock()
        xbar = smooth(abar, xbar, k - done_k)
        done_k = k
        t_pre += _clock() - t0
        for model in m.models:
            if model == "gcn" and k < 1:
                continue
            cfg = m.train_config(k_layers=k, seed=seed)
            acc, params, tm = _fit_eval(model, x, abar, xbar, labels, cfg, y)
            name = f"{model}_{tag}" if len(k_list) == 1 else f"{model}_{tag}_k{k}"
            tm = {"normalize": t_norm, "precompute": t_pre if model == "sgc" else 0.0, **tm}
            out.append(
                CellResult(name, model, variant, k, forest_size, acc, params.history["train_loss"], params.history["valid_loss"], tm)
            )
    return out


def _one_run(m: Manifest, seed: int) -> list[CellResult]:
    x, labels = load_dataset(m.dataset_spec(), seed=seed)
    y = labels.y
    results: list[CellResult] = []

    def graph(variant, tree=None, forest=None):
        t0 = _clock()
        e = build_edges(x, labels, m.recipe(variant, tree, forest), seed=seed)
        return e, _clock() - t0

    def add(cells, t_graph):
        for c in cells:
            c.timings = {"graph": t_graph, **c.timings}
        results.extend(cells)

    if m.protocol == "accuracy":
        e, tg = graph(m.variant)
        add(_model_cells(m, x, y, labels, e, seed, m.variant, [m.k_layers], m.variant, m.forest_size), tg)
    elif m.protocol == "smoothing":
        e, tg = graph(m.variant)
        add(_model_cells(m, x, y, labels, e, seed, m.variant, list(m.k_values), m.variant, m.forest_size), tg)
    elif m.protocol == "forest":
        e, tg = graph(m.variant, "pa", 1)
        add(_model_cells(m, x, y, labels, e, seed, "pa1", [m.k_layers], m.variant, 1), tg)
        for size in m.forest_sizes:
            e, tg = graph(m.variant, "rp", size)
            add(_model_cells(m, x, y, labels, e, seed, f"rp{size}", [m.k_layers], m.variant, size), tg)
    elif m.protocol == "ablation":
        for v in ABLATION_VARIANTS:
            e, tg = graph(v.value)
            add(_model_cells(m, x, y, labels, e, seed, v.value, [m.k_layers], v.value, m.forest_size), tg)
    elif m.protocol == "knn":
        t0 = _clock()
        test = labels.test
        pred = knn_classify(x[labels.train], y[labels.train], x[test], m.classifier_k)
        acc = float(np.mean(pred == y[test]))
        results.append(CellResult(f"knn_k{m.classifier_k}", "knn", "none", 0, 0, acc, timings={"train": _clock() - t0}))
        e, tg = graph(m.variant)
        add(_model_cells(m, x, y, labels, e, seed, m.variant, [m.k_layers], m.variant, m.forest_size), tg)
    return results


def _confusion_rows(m: Manifest) -> list[dict]:
    x, labels = load_dataset(m.dataset_spec(), seed=m.seed)
    truth = load_ground_truth_graph(m.ground_truth, n=x.shape[0]).to_edge_set()
    if truth.n != x.shape[0]:
        raise ManifestError(f"ground truth has {truth.n} nodes, dataset has {x.shape[0]}")
    methods = [
        ("proposed_" + m.variant, build_edges(x, labels, m.recipe(), seed=m.seed)),
        ("epsilon_mst", epsilon_graph(x, m.eps)),
        ("knn", knn_graph(x, m.knn_k)),
    ]
    rows = []
    for name, edges in methods:
        c = adjacency_confusion(edges, truth, x.shape[0])
        rows.append(
            {"method": name, "edges": len(edges), "tn": c.tn, "fn": c.fn, "fp": c.fp, "tp": c.tp,
             "removal_rate": c.removal_rate, "hit_rate": c.hit_rate}
        )
    return rows


def _run_worker(args):
    m, seed = args
    return seed, _one_run(m, seed)


def execute(m: Manifest) -> RunReport:
    """Run the manifest in memory."""
    if m.protocol == "confusion":
        return RunReport(m, {}, _confusion_rows(m))
    seeds = [m.seed + r for r in range(m.runs)]
    if m.workers > 1:
        with ProcessPoolExecutor(max_workers=m.workers) as pool:
            done = list(pool.map(_run_worker, [(m, s) for s in seeds]))
    else:
        done = [_run_worker((m, s)) for s in seeds]
    runs: dict[str, list] = {}
    for seed, cells in done:
        for c in cells:
            runs.setdefault(c.cell, []).append((seed, c))
    return RunReport(m, runs)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_report(report: RunReport, out_dir) -> Path:
    """Emit CSVs (deterministic), a JSON timing log and, for sweeps, an SVG plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = report.manifest
    (out / "manifest.json").write_text(json.dumps(m.to_dict(), sort_keys=True, indent=1) + "\n")
    if m.protocol == "confusion":
        cols = ["method", "edges", "tn", "fn", "fp", "tp", "removal_rate", "hit_rate"]
        _write_csv(out / "confusion.csv", cols, ([r[c] for c in cols] for r in report.extra))
        return out
    (out / "cells").mkdir(exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    timings = []
    for cell, rows in report.runs.items():
        cell_rows = []
        for seed, r in rows:
            curve = Path("curves") / f"{cell}_seed{seed}.csv"
            if r.train_loss:
                vl = r.valid_loss + [""] * (len(r.train_loss) - len(r.valid_loss))
                _write_csv(out / curve, ["epoch", "train_loss", "valid_loss"],
                           ((e, t, v) for e, (t, v) in enumerate(zip(r.train_loss, vl))))
            else:
                curve = ""
            cell_rows.append((seed, r.accuracy, curve))
            timings.append({"cell": cell, "seed": seed, **r.timings})
        _write_csv(out / "cells" / f"{cell}.csv", ["seed", "accuracy", "loss_curve"], cell_rows)
    summ = report.summary()
    cols = ["cell", "model", "variant", "k_layers", "forest_size", "runs", "mean", "std"]
    _write_csv(out / "aggregate.csv", cols, ([s[c] for c in cols] for s in summ))
    with open(out / "timings.jsonl", "w", encoding="utf-8") as fh:
        for t in timings:
            fh.write(json.dumps(t, sort_keys=True) + "\n")
    if m.plots and m.protocol in ("smoothing", "forest"):
        _plot_sweep(report, out / f"{m.protocol}.svg")
    return out


def _plot_sweep(report: RunReport, path: Path) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:  # plotting is optional
        log.info("matplotlib unavailable; skipping %s", path)
        return
    axis = "k_layers" if report.manifest.protocol == "smoothing" else "forest_size"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for model in report.manifest.models:
        pts = sorted((s[axis], s["mean"]) for s in report.summary() if s["model"] == model)
        if pts:
            ax.plot(*zip(*pts), marker="o", label=model.upper())
    ax.set_xlabel("propagation steps K" if axis == "k_layers" else "number of trees")
    ax.set_ylabel("mean test accuracy")
    ax.legend()
    fig.tight_layout()
    matplotlib.rcParams["svg.hashsalt"] = "patree"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def run_experiment(m: Manifest, out_dir) -> RunReport:
    report = execute(m)
    write_report(report, out_dir)
    return report
