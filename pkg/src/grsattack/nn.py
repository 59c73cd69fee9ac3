"""Fully-connected softmax classifier with analytic input and parameter gradients.

Everything is float64. A layer computes ``act(W @ x + b)`` with ``W`` of shape
``(out_dim, in_dim)``; the last layer is the identity and yields logits.
Batched inputs are rows: ``X`` has shape ``(batch, in_dim)``.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

ACTIVATIONS = ("identity", "relu")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def mlp_specs(input_dim: int, hidden=(128, 64), num_classes: int = 4) -> list[LayerSpec]:
    dims = [input_dim, *hidden]
    specs = [LayerSpec(a, b, "relu") for a, b in zip(dims[:-1], dims[1:])]
    specs.append(LayerSpec(dims[-1], num_classes, "identity"))
    return specs


def _check_chain(specs) -> None:
    if not specs:
        raise ValueError("model needs at least one layer")
    for a, b in zip(specs[:-1], specs[1:]):
        if a.out_dim != b.in_dim:
            raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
    if specs[-1].activation != "identity":
        raise ValueError("final layer must be identity (logits)")


@dataclass
class Classifier:
    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        _check_chain(self.layers)
        for spec, W, b in zip(self.layers, self.weights, self.biases, strict=True):
            if W.shape != (spec.out_dim, spec.in_dim) or b.shape != (spec.out_dim,):
                raise ValueError("parameter shapes do not match layer specs")

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "Classifier":
        return Classifier(list(self.layers), [W.copy() for W in self.weights], [b.copy() for b in self.biases])


def init_model(specs, seed: int) -> Classifier:
    """He-normal weights (std ``sqrt(2 / in_dim)``), zero biases."""
    specs = list(specs)
    _check_chain(specs)
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((s.out_dim, s.in_dim)) * np.sqrt(2.0 / s.in_dim) for s in specs]
    biases = [np.zeros(s.out_dim) for s in specs]
    return Classifier(specs, weights, biases)


def _as_batch(model: Classifier, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(f"input length {X.shape[-1]} does not match model input_dim {model.input_dim}")
    return X, single


def _forward_cache(model: Classifier, X: np.ndarray):
    acts, pre = [X], []
    h = X
    for spec, W, b in zip(model.layers, model.weights, model.biases):
        z = h @ W.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if spec.activation == "relu" else z
        acts.append(h)
    return acts, pre


def forward(model: Classifier, x) -> np.ndarray:
    """Logits for one flattened frame (length ``2N``) or a batch of rows."""
    X, single = _as_batch(model, x)
    h = X
    for spec, W, b in zip(model.layers, model.weights, model.biases):
        h = h @ W.T + b
        if spec.activation == "relu":
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def predict(model: Classifier, x):
    # np.argmax returns the first maximum, i.e. ties go to the lowest index
    logits = forward(model, x)
    out = np.argmax(logits, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def loss(logits, target) -> float | np.ndarray:
    """Cross-entropy ``-log softmax(logits)[target]``.

    ``target`` is a class index or a one-hot vector; batched logits take an
    index array and return per-row losses.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target)
    if target.ndim == logits.ndim and target.shape == logits.shape:
        target = np.argmax(target, axis=-1)
    lsm = log_softmax(logits)
    if logits.ndim == 1:
        return float(-lsm[int(target)])
    return -lsm[np.arange(len(lsm)), target]


def _backward(model: Classifier, acts, pre, dlogits: np.ndarray, need_params: bool):
    """Backpropagate ``dlogits`` (batch, C). Returns (dX, dWs, dbs)."""
    dWs, dbs = [], []
    delta = dlogits
    for k in range(len(model.layers) - 1, -1, -1):
        if model.layers[k].activation == "relu":
            # subgradient of relu at 0 is taken as 0
            delta = delta * (pre[k] > 0)
        if need_params:
            dWs.append(delta.T @ acts[k])
            dbs.append(delta.sum(axis=0))
        delta = delta @ model.weights[k]
    return delta, dWs[::-1], dbs[::-1]


def _onehot(labels, C: int) -> np.ndarray:
    labels = np.atleast_1d(labels)
    out = np.zeros((labels.size, C))
    out[np.arange(labels.size), labels] = 1.0
    return out


def grad_input(model: Classifier, x, k) -> np.ndarray:
    """Gradient of the cross-entropy toward class ``k`` with respect to the input.

    Works for a single vector with scalar ``k`` or for a batch with one class
    per row.
    """
    X, single = _as_batch(model, x)
    k = np.broadcast_to(np.asarray(k), (X.shape[0],))
    acts, pre = _forward_cache(model, X)
    dlogits = softmax(acts[-1]) - _onehot(k, model.num_classes)
    dX, _, _ = _backward(model, acts, pre, dlogits, need_params=False)
    return dX[0] if single else dX


def grad_params(model: Classifier, X, y) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy gradient over a batch; returns ``(dWs, dbs)``."""
    X, _ = _as_batch(model, X)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    acts, pre = _forward_cache(model, X)
    dlogits = (softmax(acts[-1]) - _onehot(y, model.num_classes)) / X.shape[0]
    _, dWs, dbs = _backward(model, acts, pre, dlogits, need_params=True)
    return dWs, dbs


def mean_loss(model: Classifier, X, y) -> float:
    return float(np.mean(loss(forward(model, np.atleast_2d(X)), np.atleast_1d(y))))


def accuracy(model: Classifier, X, y) -> float:
    return float(np.mean(predict(model, np.atleast_2d(X)) == np.asarray(y)))


# --- training ---------------------------------------------------------------


@dataclass
class AdvMix:
    attack: str = "fgsm"
    fraction: float = 0.5
    eps: float = 0.05
    step: float = 0.05
    iters: int = 10

    def __post_init__(self):
        if self.attack not in ("fgsm", "pgd"):
            raise ValueError(f"unknown adversarial-training attack {self.attack!r}")
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("adv_mix fraction must lie in [0, 1]")


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    learning_rate: float = 0.02
    seed: int = 0
    adv_mix: AdvMix | None = None


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    adv_counts: list[int] = field(default_factory=list)


def _adversarial_rows(model: Classifier, X: np.ndarray, y: np.ndarray, mix: AdvMix) -> np.ndarray:
    from . import attacks

    if mix.attack == "fgsm":
        return attacks.fgsm_batch(model, X, y, mix.eps)
    return attacks.pgd_batch(model, X, y, mix.eps, mix.step, mix.iters)


def _training_arrays(data):
    if hasattr(data, "train_indices"):
        idx = data.train_indices
        return data.X[idx], data.labels[idx]
    X, y = data
    return np.asarray(X, dtype=np.float64), np.asarray(y)


def _fit(model: Classifier, data, cfg: TrainConfig, mix: AdvMix | None) -> tuple[Classifier, TrainHistory]:
    model = model.copy()
    X, y = _training_arrays(data)
    if X.shape[1] != model.input_dim:
        raise ValueError(f"dataset input dim {X.shape[1]} != model input dim {model.input_dim}")
    if y.max() >= model.num_classes:
        raise ValueError("dataset has more classes than the model outputs")
    rng = np.random.default_rng(cfg.seed)
    hist = TrainHistory()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = X[idx], y[idx]
            if mix is not None and mix.fraction > 0:
                n_adv = int(round(mix.fraction * len(idx)))
                if n_adv:
                    xb = xb.copy()
                    xb[:n_adv] = _adversarial_rows(model, xb[:n_adv], yb[:n_adv], mix)
                hist.adv_counts.append(n_adv)
            dWs, dbs = grad_params(model, xb, yb)
            for W, dW in zip(model.weights, dWs):
                W -= cfg.learning_rate * dW
            for b, db in zip(model.biases, dbs):
                b -= cfg.learning_rate * db
            total += mean_loss(model, xb, yb) * len(idx)
        hist.loss.append(total / len(y))
        log.debug("epoch %d loss %.5f", epoch, hist.loss[-1])
    return model, hist


def train(model: Classifier, data, cfg: TrainConfig) -> tuple[Classifier, TrainHistory]:
    """Plain mini-batch gradient descent on the mean cross-entropy.

    ``data`` is a ``Dataset`` (its train split is used) or an ``(X, y)`` pair.
    Returns a trained copy and the per-epoch loss history (mean post-step
    batch loss). ``cfg.adv_mix`` is ignored here; see ``adversarial_train``.
    """
    return _fit(model, data, cfg, None)


def adversarial_train(model: Classifier, data, cfg: TrainConfig) -> tuple[Classifier, TrainHistory]:
    """Like ``train`` but a fraction of every batch is replaced by FGSM/PGD
    samples generated against the current parameters."""
    if cfg.adv_mix is None:
        raise ValueError("adversarial_train requires cfg.adv_mix")
    return _fit(model, data, cfg, cfg.adv_mix)


# --- AMCM file format -------------------------------------------------------

MODEL_MAGIC = b"AMCM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sII")
_LAYER_HEADER = struct.Struct("<IIB")


def model_to_bytes(model: Classifier) -> bytes:
    parts = [_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, len(model.layers))]
    for spec, W, b in zip(model.layers, model.weights, model.biases):
        parts.append(_LAYER_HEADER.pack(spec.in_dim, spec.out_dim, ACTIVATIONS.index(spec.activation)))
        parts.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(buf: bytes) -> Classifier:
    magic, version, n_layers = _MODEL_HEADER.unpack_from(buf)
    if magic != MODEL_MAGIC:
        raise ValueError(f"bad model magic {magic!r}")
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    off = _MODEL_HEADER.size
    specs, weights, biases = [], [], []
    for _ in range(n_layers):
        in_dim, out_dim, act = _LAYER_HEADER.unpack_from(buf, off)
        off += _LAYER_HEADER.size
        if act >= len(ACTIVATIONS):
            raise ValueError(f"bad activation code {act}")
        specs.append(LayerSpec(in_dim, out_dim, ACTIVATIONS[act]))
        W = np.frombuffer(buf, "<f8", in_dim * out_dim, off).reshape(out_dim, in_dim)
        off += W.nbytes
        b = np.frombuffer(buf, "<f8", out_dim, off)
        off += b.nbytes
        weights.append(W.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(buf):
        raise ValueError("trailing bytes in model file")
    return Classifier(specs, weights, biases)


def save_model(model: Classifier, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> Classifier:
    return model_from_bytes(Path(path).read_bytes())
