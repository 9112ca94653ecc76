"""SGC and GCN node classifiers trained by full-batch gradient descent.

Both heads minimise the mean softmax cross-entropy over the training nodes plus
``weight_decay / 2 * sum(||W||^2)`` (biases are not decayed). Gradients are
derived by hand; there is no autodiff dependency.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from .core import SparseAdjacency, as_feature_matrix, make_rng
from .graphs import LabelAssignment
from .propagation import NormalizedAdjacency, normalize, smooth


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.2
    weight_decay: float = 5e-4
    hidden_width: int = 16
    k_layers: int = 2
    seed: int = 0
    patience: int | None = None  # early stopping on validation loss; None = off
    momentum: float = 0.0
    bias: bool = True
    init: Literal["glorot", "zeros"] = "glorot"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.k_layers < 0:
            raise ValueError("k_layers must be >= 0")
        if self.hidden_width < 1:
            raise ValueError("hidden_width must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class ModelParams:
    kind: Literal["sgc", "gcn"]
    k_layers: int
    weights: list[np.ndarray]
    biases: list[np.ndarray] | None
    classes: np.ndarray
    history: dict[str, list[float]] = field(default_factory=lambda: {"train_loss": [], "valid_loss": []})

    def __post_init__(self):
        shapes = [w.shape for w in self.weights]
        for (_, a), (b, _) in zip(shapes, shapes[1:]):
            if a != b:
                raise ValueError(f"layer shapes do not chain: {shapes}")
        if shapes[-1][1] != len(self.classes):
            raise ValueError(f"output width {shapes[-1][1]} != class count {len(self.classes)}")
        if self.biases is not None and [b.shape for b in self.biases] != [(s[1],) for s in shapes]:
            raise ValueError("bias shapes do not match layer widths")
        if self.kind == "sgc" and len(self.weights) != 1:
            raise ValueError("an SGC model has exactly one layer")
        if self.kind == "gcn" and len(self.weights) != self.k_layers:
            raise ValueError("a GCN model has one layer per propagation step")

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    def flat(self) -> list[np.ndarray]:
        return list(self.weights) + (list(self.biases) if self.biases is not None else [])


# -- loss ---------------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits, targets, weight_decay: float = 0.0, weights=()):
    """Mean cross-entropy of ``softmax(logits)`` against integer ``targets``.

    Returns ``(loss, grad_logits, grad_weights)`` where ``grad_weights`` is the
    weight-decay term's gradient for each array in ``weights``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    m = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(m), targets]))
    p = np.exp(z - lse[:, None])
    p[np.arange(m), targets] -= 1.0
    grad = p / m
    loss += 0.5 * weight_decay * sum(float(np.sum(w * w)) for w in weights)
    return loss, grad, [weight_decay * w for w in weights]


# -- forward / backward -------------------------------------------------------


def sgc_loss_grad(params: ModelParams, xbar_rows: np.ndarray, targets: np.ndarray, weight_decay: float):
    """Loss and gradients (weights then biases) for the linear head on smoothed rows."""
    w = params.weights[0]
    logits = xbar_rows @ w
    if params.biases is not None:
        logits = logits + params.biases[0]
    loss, g, (gw_decay,) = softmax_xent(logits, targets, weight_decay, [w])
    grads = [xbar_rows.T @ g + gw_decay]
    if params.biases is not None:
        grads.append(g.sum(axis=0))
    return loss, grads


def gcn_forward(params: ModelParams, abar: NormalizedAdjacency, x: np.ndarray):
    """Returns the output logits and the per-layer cache ``(propagated, preact)``."""
    h = x
    cache = []
    last = len(params.weights) - 1
    for layer, w in enumerate(params.weights):
        p = abar.apply(h)
        z = p @ w
        if params.biases is not None:
            z = z + params.biases[layer]
        cache.append((p, z))
        h = np.maximum(z, 0.0) if layer < last else z
    return h, cache


def gcn_loss_grad(
    params: ModelParams,
    abar: NormalizedAdjacency,
    x: np.ndarray,
    train: np.ndarray,
    targets: np.ndarray,
    weight_decay: float,
):
    logits, cache = gcn_forward(params, abar, x)
    loss, g_rows, decay = softmax_xent(logits[train], targets, weight_decay, params.weights)
    dz = np.zeros_like(logits)
    dz[train] = g_rows
    n_layers = len(params.weights)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for layer in range(n_layers - 1, -1, -1):
        p, _ = cache[layer]
        gw[layer] = p.T @ dz + decay[layer]
        gb[layer] = dz.sum(axis=0)
        if layer == 0:
            break
        dh = abar.apply(dz @ params.weights[layer].T)  # Abar is symmetric
        dz = dh * (cache[layer - 1][1] > 0)
    grads = gw + (gb if params.biases is not None else [])
    return loss, grads


# -- training -----------------------------------------------------------------


def _encode(labels: LabelAssignment):
    known = np.concatenate([labels.train, labels.valid])
    classes = np.unique(labels.y[known])
    lookup = {int(c): i for i, c in enumerate(classes)}
    enc = lambda idx: np.array([lookup[int(c)] for c in labels.y[idx]], dtype=np.int64)  # noqa: E731
    return classes, enc(labels.train), enc(labels.valid)


def _init_layers(dims: list[int], cfg: TrainConfig, kind: str, classes, rng) -> ModelParams:
    weights = []
    for d_in, d_out in zip(dims, dims[1:]):
        if cfg.init == "zeros":
            weights.append(np.zeros((d_in, d_out)))
        else:
            lim = math.sqrt(6.0 / (d_in + d_out))
            weights.append(rng.uniform(-lim, lim, size=(d_in, d_out)))
    biases = [np.zeros(w.shape[1]) for w in weights] if cfg.bias else None
    return ModelParams(kind, cfg.k_layers, weights, biases, classes)


def _descend(
    params: ModelParams,
    cfg: TrainConfig,
    loss_grad: Callable[[ModelParams], tuple[float, list[np.ndarray]]],
    valid_loss: Callable[[ModelParams], float] | None,
) -> ModelParams:
    tensors = params.flat()
    velocity = [np.zeros_like(t) for t in tensors]
    best, best_state, stale = math.inf, None, 0
    for epoch in range(cfg.epochs):
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is reported below
            loss, grads = loss_grad(params)
        if not math.isfinite(loss):
            raise DivergenceError(
                f"non-finite training loss at epoch {epoch} (lr={cfg.learning_rate}); "
                "try a smaller learning rate or standardized features"
            )
        params.history["train_loss"].append(loss)
        for t, g, v in zip(tensors, grads, velocity):
            with np.errstate(over="ignore"):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                t += v
        if valid_loss is not None:
            with np.errstate(over="ignore", invalid="ignore"):
                vl = valid_loss(params)
            params.history["valid_loss"].append(vl)
            if cfg.patience is not None:
                if vl < best:
                    best, best_state, stale = vl, [t.copy() for t in tensors], 0
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        break
    if best_state is not None:
        for t, s in zip(tensors, best_state):
            t[...] = s
    return params


def _check_fit_inputs(x, adj: SparseAdjacency, labels: LabelAssignment):
    x = as_feature_matrix(x)
    if labels.train.size == 0:
        raise ValueError("cannot fit: the train split is empty")
    if adj.n != x.shape[0] or labels.n != x.shape[0]:
        raise ValueError(f"size mismatch: features {x.shape[0]}, adjacency {adj.n}, labels {labels.n}")
    return x


def sgc_precompute(x, adj: SparseAdjacency, k: int) -> np.ndarray:
    return smooth(normalize(adj), as_feature_matrix(x), k)


def sgc_fit_smoothed(xbar: np.ndarray, labels: LabelAssignment, cfg: TrainConfig) -> ModelParams:
    """Train the SGC head on already-smoothed features."""
    if labels.train.size == 0:
        raise ValueError("cannot fit: the train split is empty")
    classes, y_tr, y_va = _encode(labels)
    params = _init_layers([xbar.shape[1], len(classes)], cfg, "sgc", classes, make_rng(cfg.seed))
    x_tr, x_va = xbar[labels.train], xbar[labels.valid]

    def valid_loss(p):
        return sgc_loss_grad(p, x_va, y_va, cfg.weight_decay)[0]

    return _descend(
        params,
        cfg,
        lambda p: sgc_loss_grad(p, x_tr, y_tr, cfg.weight_decay),
        valid_loss if labels.valid.size else None,
    )


def sgc_fit(x, adj: SparseAdjacency, labels: LabelAssignment, cfg: TrainConfig = TrainConfig()) -> ModelParams:
    """Smooth once with ``Abar^K``, then fit multinomial logistic regression."""
    x = _check_fit_inputs(x, adj, labels)
    return sgc_fit_smoothed(sgc_precompute(x, adj, cfg.k_layers), labels, cfg)


def gcn_fit(x, adj: SparseAdjacency, labels: LabelAssignment, cfg: TrainConfig = TrainConfig()) -> ModelParams:
    """K-layer GCN: ReLU between layers, softmax on the last; one propagation per layer."""
    if cfg.k_layers < 1:
        raise ValueError("a GCN needs k_layers >= 1")
    x = _check_fit_inputs(x, adj, labels)
    abar = normalize(adj)
    return gcn_fit_normalized(x, abar, labels, cfg)


def gcn_fit_normalized(x: np.ndarray, abar: NormalizedAdjacency, labels: LabelAssignment, cfg: TrainConfig) -> ModelParams:
    classes, y_tr, y_va = _encode(labels)
    dims = [x.shape[1]] + [cfg.hidden_width] * (cfg.k_layers - 1) + [len(classes)]
    params = _init_layers(dims, cfg, "gcn", classes, make_rng(cfg.seed))
    va = labels.valid

    def valid_loss(p):
        logits, _ = gcn_forward(p, abar, x)
        return softmax_xent(logits[va], y_va, cfg.weight_decay, p.weights)[0]

    return _descend(
        params,
        cfg,
        lambda p: gcn_loss_grad(p, abar, x, labels.train, y_tr, cfg.weight_decay),
        valid_loss if va.size else None,
    )


def logits(params: ModelParams, x, adj: SparseAdjacency) -> np.ndarray:
    x = as_feature_matrix(x)
    if x.shape[1] != params.n_features:
        raise ValueError(f"model expects {params.n_features} features, got {x.shape[1]}")
    if adj.n != x.shape[0]:
        raise ValueError(f"adjacency has {adj.n} nodes, features have {x.shape[0]} rows")
    abar = normalize(adj)
    if params.kind == "sgc":
        out = smooth(abar, x, params.k_layers) @ params.weights[0]
        return out + params.biases[0] if params.biases is not None else out
    return gcn_forward(params, abar, x)[0]


def predict(params: ModelParams, x, adj: SparseAdjacency, cfg: TrainConfig | None = None) -> np.ndarray:
    """Original class id per node; ties go to the lowest class."""
    if cfg is not None and cfg.k_layers != params.k_layers:
        raise ValueError(f"config k_layers={cfg.k_layers} but model was trained with {params.k_layers}")
    return params.classes[np.argmax(logits(params, x, adj), axis=1)]


# -- checkpoints --------------------------------------------------------------
#
# One JSON header line (kind, k_layers, classes, layer shapes, has_bias), then
# the raw little-endian float64 values of every weight matrix (row-major) followed
# by every bias vector.


def save_params(params: ModelParams, path) -> None:
    header = {
        "format": "patree-params/1",
        "kind": params.kind,
        "k_layers": params.k_layers,
        "classes": [int(c) for c in params.classes],
        "shapes": [list(w.shape) for w in params.weights],
        "bias": params.biases is not None,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for t in params.flat():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_params(path) -> ModelParams:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    try:
        header = json.loads(head)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: bad checkpoint header") from exc
    shapes = [tuple(s) for s in header["shapes"]]
    sizes = [a * b for a, b in shapes]
    if header["bias"]:
        sizes += [s[1] for s in shapes]
    if len(body) != 8 * sum(sizes):
        raise ValueError(f"{path}: expected {8 * sum(sizes)} payload bytes, found {len(body)}")
    values = np.frombuffer(body, dtype="<f8")
    chunks, off = [], 0
    for s in sizes:
        chunks.append(values[off : off + s].astype(np.float64))
        off += s
    weights = [c.reshape(s) for c, s in zip(chunks, shapes)]
    biases = chunks[len(shapes) :] if header["bias"] else None
    return ModelParams(header["kind"], header["k_layers"], weights, biases, np.asarray(header["classes"]))

