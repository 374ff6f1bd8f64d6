"""Win/lose classifier: a 3-hidden-layer MLP trained from scratch.

Layers are Linear -> BatchNorm -> LeakyReLU -> Dropout (dropout in the
first two hidden layers only), with a linear 2-class output head,
cross-entropy loss, Adam, and a step learning-rate schedule. Everything is
plain numpy with hand-written gradients so the whole training loop is
deterministic per seed.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import LabeledMatrix
from .errors import DataError, NumericError

HIDDEN_DIMS = (256, 128, 64)
N_CLASSES = 2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr: float = 1e-3
    lr_step: int = 5
    lr_gamma: float = 0.5
    dropout: float = 0.3
    leaky_slope: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.dropout < 1):
            raise DataError("dropout must be in [0, 1)")
        if min(self.epochs, self.batch_size, self.lr_step) < 1 or self.lr <= 0:
            raise DataError("epochs, batch_size, lr_step, lr must be positive")


@dataclass
class ModelParams:
    dims: tuple[int, ...]  # (d, 256, 128, 64, 2)
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bn_gamma: list[np.ndarray]
    bn_beta: list[np.ndarray]
    bn_mean: list[np.ndarray]
    bn_var: list[np.ndarray]
    leaky_slope: float = 0.01
    dropout: float = 0.3
    # feature z-normalization fitted on training data; applied by callers
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    def trainable(self) -> list[np.ndarray]:
        return self.weights + self.biases + self.bn_gamma + self.bn_beta


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: np.ndarray  # rows true, cols predicted

    def as_percentages(self) -> dict[str, float]:
        return {"ACC": 100 * self.accuracy, "PRC": 100 * self.precision,
                "RCL": 100 * self.recall, "F1": 100 * self.f1}


def init_model(input_dim: int, seed: int = 0,
               cfg: TrainConfig | None = None) -> ModelParams:
    """Kaiming-uniform weights for LeakyReLU fan-in, zero biases, unit BN."""
    if input_dim < 1:
        raise DataError("input_dim must be >= 1")
    cfg = cfg or TrainConfig()
    rng = np.random.default_rng(seed)
    dims = (input_dim, *HIDDEN_DIMS, N_CLASSES)
    weights, biases = [], []
    gain = np.sqrt(2.0 / (1.0 + cfg.leaky_slope ** 2))
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = gain * np.sqrt(3.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(
        dims=dims, weights=weights, biases=biases,
        bn_gamma=[np.ones(d) for d in HIDDEN_DIMS],
        bn_beta=[np.zeros(d) for d in HIDDEN_DIMS],
        bn_mean=[np.zeros(d) for d in HIDDEN_DIMS],
        bn_var=[np.ones(d) for d in HIDDEN_DIMS],
        leaky_slope=cfg.leaky_slope, dropout=cfg.dropout,
    )


def _forward_full(params: ModelParams, batch: np.ndarray, train: bool,
                  dropout_rng=None, update_running: bool = True):
    """Forward pass returning logits and the caches needed for backprop."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[1] != params.input_dim:
        raise DataError(
            f"input dim {x.shape[1]} does not match model dim {params.input_dim}")
    if train and x.shape[0] < 2:
        raise DataError("train-mode forward needs a batch of at least 2")

    caches = []
    h = x
    n_hidden = len(HIDDEN_DIMS)
    for i in range(n_hidden):
        z = h @ params.weights[i] + params.biases[i]
        if train:
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            if update_running:
                params.bn_mean[i] = ((1 - BN_MOMENTUM) * params.bn_mean[i]
                                     + BN_MOMENTUM * mu)
                params.bn_var[i] = ((1 - BN_MOMENTUM) * params.bn_var[i]
                                    + BN_MOMENTUM * var)
        else:
            mu, var = params.bn_mean[i], params.bn_var[i]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (z - mu) * inv_std
        bn_out = params.bn_gamma[i] * xhat + params.bn_beta[i]
        act = np.where(bn_out > 0, bn_out, params.leaky_slope * bn_out)
        mask = None
        if train and params.dropout > 0 and i < 2 and dropout_rng is not None:
            keep = 1.0 - params.dropout
            mask = (dropout_rng.random(act.shape) < keep) / keep
            act = act * mask
        caches.append({"input": h, "xhat": xhat, "inv_std": inv_std,
                       "bn_out": bn_out, "mask": mask})
        h = act
    logits = h @ params.weights[-1] + params.biases[-1]
    caches.append({"input": h})
    return logits, caches


def forward(params: ModelParams, batch: np.ndarray, mode: str = "eval",
            dropout_seed: int | None = None) -> np.ndarray:
    """Logits for a batch; mode is 'train' (batch statistics) or 'eval'."""
    if mode not in ("train", "eval"):
        raise DataError(f"mode must be train or eval, got {mode!r}")
    rng = (np.random.default_rng(dropout_seed)
           if dropout_seed is not None else None)
    logits, _ = _forward_full(params, batch, train=(mode == "train"),
                              dropout_rng=rng)
    return logits


def predict_proba(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    logits = forward(params, batch, mode="eval")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    return expv / expv.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-softmax of the true class, log-sum-exp stabilized."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1))
    nll = lse - shifted[np.arange(labels.size), labels]
    return float(nll.mean())


def _backward(params: ModelParams, caches, logits, labels):
    """Gradients of mean cross-entropy w.r.t. every trainable tensor."""
    n = labels.size
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n

    n_hidden = len(HIDDEN_DIMS)
    grads = {"weights": [None] * (n_hidden + 1),
             "biases": [None] * (n_hidden + 1),
             "bn_gamma": [None] * n_hidden,
             "bn_beta": [None] * n_hidden}

    grads["weights"][-1] = caches[-1]["input"].T @ dlogits
    grads["biases"][-1] = dlogits.sum(axis=0)
    dh = dlogits @ params.weights[-1].T

    for i in reversed(range(n_hidden)):
        c = caches[i]
        if c["mask"] is not None:
            dh = dh * c["mask"]
        dbn = dh * np.where(c["bn_out"] > 0, 1.0, params.leaky_slope)
        grads["bn_gamma"][i] = (dbn * c["xhat"]).sum(axis=0)
        grads["bn_beta"][i] = dbn.sum(axis=0)
        dxhat = dbn * params.bn_gamma[i]
        m = dxhat.shape[0]
        dz = (c["inv_std"] / m) * (m * dxhat - dxhat.sum(axis=0)
                                   - c["xhat"] * (dxhat * c["xhat"]).sum(axis=0))
        grads["weights"][i] = c["input"].T @ dz
        grads["biases"][i] = dz.sum(axis=0)
        dh = dz @ params.weights[i].T
    return grads


def loss_and_grads(params: ModelParams, batch: np.ndarray, labels: np.ndarray,
                   dropout_rng=None, update_running: bool = True):
    logits, caches = _forward_full(params, batch, train=True,
                                   dropout_rng=dropout_rng,
                                   update_running=update_running)
    loss = cross_entropy(logits, labels)
    grads = _backward(params, caches, logits, np.asarray(labels, dtype=np.int64))
    return loss, grads


class AdamState:
    """Per-tensor first/second moment accumulators with bias correction."""

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.step = 0
        self.m: dict[str, list[np.ndarray]] = {}
        self.v: dict[str, list[np.ndarray]] = {}

    def update(self, params: ModelParams, grads: dict, lr: float):
        cfg = self.cfg
        self.step += 1
        t = self.step
        for group, tensors in (("weights", params.weights),
                               ("biases", params.biases),
                               ("bn_gamma", params.bn_gamma),
                               ("bn_beta", params.bn_beta)):
            if group not in self.m:
                self.m[group] = [np.zeros_like(x) for x in tensors]
                self.v[group] = [np.zeros_like(x) for x in tensors]
            for i, g in enumerate(grads[group]):
                self.m[group][i] = (cfg.adam_beta1 * self.m[group][i]
                                    + (1 - cfg.adam_beta1) * g)
                self.v[group][i] = (cfg.adam_beta2 * self.v[group][i]
                                    + (1 - cfg.adam_beta2) * g * g)
                m_hat = self.m[group][i] / (1 - cfg.adam_beta1 ** t)
                v_hat = self.v[group][i] / (1 - cfg.adam_beta2 ** t)
                tensors[i] -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    return cfg.lr * cfg.lr_gamma ** (epoch // cfg.lr_step)


def train(train_data: LabeledMatrix, val_data: LabeledMatrix,
          cfg: TrainConfig = TrainConfig()):
    """Mini-batch Adam training; returns (best params, per-epoch history).

    The returned parameters are from the epoch with the lowest validation
    loss. Raises NumericError if the loss goes non-finite.
    """
    if train_data.rows.size == 0 or val_data.rows.size == 0:
        raise DataError("empty training or validation data")
    params = init_model(train_data.rows.shape[1], seed=cfg.seed, cfg=cfg)
    adam = AdamState(cfg)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)
    dropout_rng = np.random.default_rng(cfg.seed + 2)

    n = train_data.rows.shape[0]
    history = []
    best = (np.inf, None)
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        order = shuffle_rng.permutation(n)
        bounds = list(range(0, n, cfg.batch_size)) + [n]
        # a trailing batch of 1 breaks batch-norm; fold it into the previous
        if n > 1 and bounds[-1] - bounds[-2] == 1:
            bounds.pop(-2)
        losses = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = order[lo:hi]
            loss, grads = loss_and_grads(params, train_data.rows[idx],
                                         train_data.labels[idx],
                                         dropout_rng=dropout_rng)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}")
            adam.update(params, grads, lr)
            losses.append(loss)

        val_logits = forward(params, val_data.rows, mode="eval")
        val_loss = cross_entropy(val_logits, val_data.labels)
        val_metrics = evaluate(params, val_data)
        history.append({
            "epoch": epoch, "lr": lr,
            "train_loss": float(np.mean(losses)) if losses else np.nan,
            "val_loss": val_loss, "val_acc": val_metrics.accuracy,
        })
        if val_loss < best[0]:
            best = (val_loss, copy.deepcopy(params))
    return best[1], history


def evaluate(params: ModelParams, data: LabeledMatrix) -> Metrics:
    """Accuracy plus macro-averaged precision/recall/F1 over the two classes."""
    if data.rows.size == 0:
        raise DataError("cannot evaluate on empty data")
    preds = np.argmax(forward(params, data.rows, mode="eval"), axis=1)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for t, p in zip(data.labels, preds):
        confusion[t, p] += 1

    def safe_div(a, b):
        return a / b if b else 0.0

    precisions, recalls, f1s = [], [], []
    for c in range(N_CLASSES):
        tp = confusion[c, c]
        prc = safe_div(tp, confusion[:, c].sum())
        rcl = safe_div(tp, confusion[c, :].sum())
        precisions.append(prc)
        recalls.append(rcl)
        f1s.append(safe_div(2 * prc * rcl, prc + rcl))
    return Metrics(
        accuracy=float(np.trace(confusion) / confusion.sum()),
        precision=float(np.mean(precisions)),
        recall=float(np.mean(recalls)),
        f1=float(np.mean(f1s)),
        confusion=confusion,
    )


def _f32(arr: np.ndarray):
    return np.asarray(arr, dtype=np.float32).astype(np.float64)


def save_checkpoint(params: ModelParams, path) -> None:
    """Write params as JSON; tensors are rounded to float32 precision."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "dims": list(params.dims),
        "leaky_slope": params.leaky_slope,
        "dropout": params.dropout,
        "weights": [_f32(w).tolist() for w in params.weights],
        "biases": [_f32(b).tolist() for b in params.biases],
        "bn_gamma": [_f32(g).tolist() for g in params.bn_gamma],
        "bn_beta": [_f32(b).tolist() for b in params.bn_beta],
        "bn_mean": [_f32(m).tolist() for m in params.bn_mean],
        "bn_var": [_f32(v).tolist() for v in params.bn_var],
        "norm_mean": (_f32(params.norm_mean).tolist()
                      if params.norm_mean is not None else None),
        "norm_std": (_f32(params.norm_std).tolist()
                     if params.norm_std is not None else None),
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> ModelParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt checkpoint {path}: {exc}") from None
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(
            f"checkpoint version {doc.get('version')} != {CHECKPOINT_VERSION}")
    dims = tuple(doc["dims"])
    if dims[1:] != (*HIDDEN_DIMS, N_CLASSES):
        raise DataError(f"unexpected architecture {dims}")

    def tensors(key, shapes):
        out = [_f32(np.asarray(t)) for t in doc[key]]
        for t, shape in zip(out, shapes):
            if t.shape != shape:
                raise DataError(
                    f"checkpoint {key} shape {t.shape} != expected {shape}")
        return out

    w_shapes = [(a, b) for a, b in zip(dims[:-1], dims[1:])]
    b_shapes = [(d,) for d in dims[1:]]
    h_shapes = [(d,) for d in HIDDEN_DIMS]
    return ModelParams(
        dims=dims,
        weights=tensors("weights", w_shapes),
        biases=tensors("biases", b_shapes),
        bn_gamma=tensors("bn_gamma", h_shapes),
        bn_beta=tensors("bn_beta", h_shapes),
        bn_mean=tensors("bn_mean", h_shapes),
        bn_var=tensors("bn_var", h_shapes),
        leaky_slope=doc["leaky_slope"],
        dropout=doc["dropout"],
        norm_mean=(_f32(np.asarray(doc["norm_mean"]))
                   if doc.get("norm_mean") is not None else None),
        norm_std=(_f32(np.asarray(doc["norm_std"]))
                  if doc.get("norm_std") is not None else None),
    )
