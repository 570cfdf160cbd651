"""Feedforward edge-feasibility predictor built on plain numpy.

A small ReLU MLP with a sigmoid head, trained with SGD + momentum, binary
cross-entropy and early stopping; plus a logistic-regression baseline (the
same machinery with no hidden layers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .envsim import Sample, Weather
from .terrain import TerrainGraph

DEFAULT_DIMS = [5, 32, 32, 16, 1]
LOGISTIC_DIMS = [5, 1]
# Per-feature divisors for [x1, x2, x3, max_slope_deg, dist_m].
NORMALIZER = [10.0, 10.0, 10.0, 45.0, 1000.0]

_PRED_EPS = 1e-7  # BCE clamp
_PROB_EPS = 1e-12  # forward output kept strictly inside (0, 1)


@dataclass
class MLPParams:
    dims: list[int]
    weights: list[np.ndarray]  # layer l: shape (dims[l+1], dims[l]), row-major
    biases: list[np.ndarray]
    normalizer: np.ndarray
    kind: str = "mlp"

    def copy(self) -> "MLPParams":
        return MLPParams(
            list(self.dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.normalizer.copy(),
            self.kind,
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("bad batch_size/max_epochs/patience")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _normalize(params: MLPParams, X: np.ndarray) -> np.ndarray:
    return np.clip(X / params.normalizer, 0.0, 2.0)


def _forward_batch(params: MLPParams, X: np.ndarray) -> np.ndarray:
    a = _normalize(params, X)
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = _sigmoid(z) if l == last else np.maximum(z, 0.0)
    return np.clip(a[:, 0], _PROB_EPS, 1.0 - _PROB_EPS)


def forward(params: MLPParams, features: Sequence[float]) -> float:
    """Predicted probability that the edge is preferred (feasible)."""
    x = np.asarray(features, dtype=float)
    if x.shape != (params.dims[0],):
        raise ValueError(f"expected {params.dims[0]} features, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature value")
    return float(_forward_batch(params, x[None, :])[0])


def bce(pred: float, label: int) -> float:
    """Binary cross-entropy with the prediction clamped away from 0 and 1."""
    p = min(max(pred, _PRED_EPS), 1.0 - _PRED_EPS)
    return -(label * np.log(p) + (1 - label) * np.log(1.0 - p))


def _to_arrays(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([s.features for s in samples], dtype=float)
    y = np.array([s.label for s in samples], dtype=float)
    return X, y


def _loss_arrays(params: MLPParams, X: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(_forward_batch(params, X), _PRED_EPS, 1.0 - _PRED_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _backward_arrays(
    params: MLPParams, X: np.ndarray, y: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    n = X.shape[0]
    acts = [_normalize(params, X)]
    zs = []
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = acts[-1] @ w.T + b
        zs.append(z)
        acts.append(_sigmoid(z) if l == last else np.maximum(z, 0.0))
    p = acts[-1][:, 0]

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.weights)
    delta = ((p - y) / n)[:, None]  # d(mean BCE)/dz at the sigmoid head
    for l in range(last, -1, -1):
        grads[l] = (delta.T @ acts[l], delta.sum(axis=0))
        if l > 0:
            delta = (delta @ params.weights[l]) * (zs[l - 1] > 0.0)
    return grads


def backward(
    params: MLPParams, batch: Sequence[Sample]
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradient of the mean BCE over the batch, matching params layout."""
    if not batch:
        raise ValueError("empty batch")
    X, y = _to_arrays(batch)
    return _backward_arrays(params, X, y)


def _mix_seed(*parts: int) -> int:
    h = 0
    for p in parts:
        h = (h * 1_000_003 + (p & 0xFFFFFFFFFFFFFFFF)) & 0xFFFFFFFFFFFFFFFF
    return h


def init_params(dims: Sequence[int], seed: int, kind: str = "mlp") -> MLPParams:
    """He-uniform weights, zero biases; logistic params start at zero."""
    rng = np.random.default_rng(_mix_seed(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        if kind == "logistic":
            weights.append(np.zeros((fan_out, fan_in)))
        else:
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(list(dims), weights, biases, np.array(NORMALIZER), kind)


def _fit(
    params: MLPParams,
    train_data: Sequence[Sample],
    val_data: Sequence[Sample],
    cfg: TrainConfig,
) -> tuple[MLPParams, TrainHistory]:
    if not train_data or not val_data:
        raise ValueError("train and validation sets must be nonempty")
    if len({s.label for s in train_data}) < 2:
        raise ValueError("training set must contain both classes")
    X_tr, y_tr = _to_arrays(train_data)
    X_val, y_val = _to_arrays(val_data)

    velocity = [
        (np.zeros_like(w), np.zeros_like(b))
        for w, b in zip(params.weights, params.biases)
    ]
    history = TrainHistory()
    best = params.copy()
    best_loss = np.inf
    stale = 0
    for epoch in range(cfg.max_epochs):
        order = np.random.default_rng(_mix_seed(cfg.seed, epoch + 1)).permutation(
            len(train_data)
        )
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            grads = _backward_arrays(params, X_tr[idx], y_tr[idx])
            for l, (gw, gb) in enumerate(grads):
                vw, vb = velocity[l]
                vw *= cfg.momentum
                vw -= cfg.learning_rate * gw
                vb *= cfg.momentum
                vb -= cfg.learning_rate * gb
                params.weights[l] += vw
                params.biases[l] += vb

        history.train_loss.append(_loss_arrays(params, X_tr, y_tr))
        val_loss = _loss_arrays(params, X_val, y_val)
        history.val_loss.append(val_loss)
        history.val_acc.append(
            float(np.mean((_forward_batch(params, X_val) >= 0.5) == (y_val == 1.0)))
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best = params.copy()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale > cfg.patience:
                break
    history.stopped_epoch = len(history.val_loss)
    return best, history


def train(
    train_data: Sequence[Sample], val_data: Sequence[Sample], cfg: TrainConfig
) -> tuple[MLPParams, TrainHistory]:
    """Train the MLP; returns the best-validation-loss parameters."""
    params = init_params(DEFAULT_DIMS, cfg.seed, "mlp")
    return _fit(params, train_data, val_data, cfg)


def train_logistic(
    train_data: Sequence[Sample], val_data: Sequence[Sample], cfg: TrainConfig
) -> tuple[MLPParams, TrainHistory]:
    """Logistic-regression baseline: single affine map + sigmoid."""
    params = init_params(LOGISTIC_DIMS, cfg.seed, "logistic")
    return _fit(params, train_data, val_data, cfg)


def evaluate(params: MLPParams, data: Sequence[Sample]) -> float:
    """Fraction of samples classified correctly; 0.5 rounds up to 1."""
    if not data:
        raise ValueError("empty evaluation set")
    X, y = _to_arrays(data)
    return float(np.mean((_forward_batch(params, X) >= 0.5) == (y == 1.0)))


def edge_preferences(
    params: MLPParams, graph: TerrainGraph, w: Weather
) -> dict[str, float]:
    """Per-edge penalty 1 - p(feasible) under weather w, shared by both arcs."""
    if not graph.edges:
        return {}
    X = np.array(
        [
            [float(w.x1), float(w.x2), float(w.x3), e.max_slope_deg, e.dist_mm / 1000.0]
            for e in graph.edges
        ]
    )
    probs = _forward_batch(params, X)
    return {e.id: float(1.0 - p) for e, p in zip(graph.edges, probs)}


def params_to_json(params: MLPParams) -> str:
    doc = {
        "dims": list(params.dims),
        "layers": [
            {"w": w.tolist(), "b": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ],
        "normalizer": params.normalizer.tolist(),
        "kind": params.kind,
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def params_from_json(text: str) -> MLPParams:
    try:
        doc = json.loads(text)
        dims = [int(d) for d in doc["dims"]]
        weights = [np.array(layer["w"], dtype=float) for layer in doc["layers"]]
        biases = [np.array(layer["b"], dtype=float) for layer in doc["layers"]]
        normalizer = np.array(doc["normalizer"], dtype=float)
        kind = doc["kind"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad model document: {exc}") from exc
    for l, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[l + 1], dims[l]) or b.shape != (dims[l + 1],):
            raise ValueError(f"layer {l} shape mismatch with dims {dims}")
    return MLPParams(dims, weights, biases, normalizer, kind)
