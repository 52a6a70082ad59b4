"""Single-hidden-layer neural network base classifier.

Identity input and output transfer, ``f_hid`` on the hidden layer, trained on
the squared error ``1/2 (out - y)^2`` by full-batch gradient descent. The raw
score handed to the meta layer squashes the network output through ``f_hid``
so it lies in (-1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import AnnTrainConfig
from .errors import DataError, NumericError
from .features import NormParams

_CHUNK = 256


def f_hid(x):
    """2 / (1 + exp(-2x)) - 1, equal to tanh(x)."""
    with np.errstate(over="ignore"):
        return 2.0 / (1.0 + np.exp(-2.0 * np.asarray(x, dtype=np.float64))) - 1.0


def sign_func(x) -> int:
    if x < 0:
        return -1
    if x > 0:
        return 1
    return 0


@dataclass(frozen=True)
class AnnModel:
    w_in: np.ndarray  # (hidden, inputs)
    w_out: np.ndarray  # (hidden,)
    bias_hid: np.ndarray  # (hidden,)
    bias_out: float
    threshold: float = 0.0
    norm: NormParams | None = None
    loss_history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.w_in.ndim != 2 or self.w_in.shape[0] < 1:
            raise DataError(f"w_in must be (hidden>=1, inputs), got {self.w_in.shape}")
        h = self.w_in.shape[0]
        if self.w_out.shape != (h,) or self.bias_hid.shape != (h,):
            raise DataError("w_out and bias_hid must match the hidden layer size")

    @property
    def hidden_count(self) -> int:
        return self.w_in.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]


def _check_dim(model: AnnModel, X: np.ndarray) -> None:
    if X.shape[-1] != model.input_dim:
        raise DataError(f"feature dimension {X.shape[-1]} != network inputs {model.input_dim}")


def ann_forward(model: AnnModel, v) -> float:
    v = np.asarray(v, dtype=np.float64)
    _check_dim(model, v)
    hid = f_hid(model.bias_hid + (model.w_in * v).sum(axis=1))
    return float(model.bias_out + (model.w_out * hid).sum())


def ann_forward_batch(model: AnnModel, X) -> np.ndarray:
    """Network output per row; each row's arithmetic is independent of the batch."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_dim(model, X)
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], _CHUNK):
        block = X[s:s + _CHUNK]
        hid = f_hid(model.bias_hid + (block[:, None, :] * model.w_in[None, :, :]).sum(axis=2))
        out[s:s + _CHUNK] = model.bias_out + (hid * model.w_out).sum(axis=1)
    return out


def ann_gradients(model: AnnModel, v, y_p: float) -> dict[str, np.ndarray | float]:
    """Exact gradient of 1/2 (out - y_p)^2 for one sample."""
    v = np.asarray(v, dtype=np.float64)
    _check_dim(model, v)
    hid = f_hid(model.bias_hid + model.w_in @ v)
    out = model.bias_out + model.w_out @ hid
    resid = out - y_p
    delta = resid * model.w_out * (1.0 + hid) * (1.0 - hid)
    return {
        "w_out": resid * hid,
        "bias_out": float(resid),
        "w_in": np.outer(delta, v),
        "bias_hid": delta,
    }


def _batch_loss_grad(params, X, y):
    w_in, w_out, b_hid, b_out = params
    hid = f_hid(X @ w_in.T + b_hid)
    out = hid @ w_out + b_out
    resid = out - y
    n = X.shape[0]
    loss = 0.5 * float(resid @ resid) / n
    delta = (resid[:, None] * w_out[None, :]) * (1.0 + hid) * (1.0 - hid)
    grads = (delta.T @ X / n, hid.T @ resid / n, delta.sum(axis=0) / n, float(resid.sum()) / n)
    return loss, grads


def ann_init(input_dim: int, cfg: AnnTrainConfig) -> AnnModel:
    if cfg.hidden_count < 1:
        raise DataError("hidden_count must be at least 1")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    s = cfg.init_scale
    w_in = rng.uniform(-s, s, size=(cfg.hidden_count, input_dim))
    w_out = rng.uniform(-s, s, size=cfg.hidden_count)
    return AnnModel(w_in, w_out, np.zeros(cfg.hidden_count), 0.0)


def ann_train(X, y, cfg: AnnTrainConfig | None = None, norm: NormParams | None = None) -> AnnModel:
    """Full-batch gradient descent on the mean squared error.

    A step that raises the loss is rejected and the learning rate halved, so
    the recorded loss never increases.
    """
    cfg = cfg or AnnTrainConfig()
    if not cfg.learning_rate > 0:
        raise DataError(f"learning_rate must be positive, got {cfg.learning_rate}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 1 or X.shape[0] != y.shape[0]:
        raise DataError(f"need matching, non-empty X and y; got {X.shape[0]} and {y.shape[0]}")
    init = ann_init(X.shape[1], cfg)
    params = (init.w_in, init.w_out, init.bias_hid, init.bias_out)
    loss, grads = _batch_loss_grad(params, X, y)
    history = [loss]
    lr = cfg.learning_rate
    for epoch in range(1, cfg.epochs + 1):
        cand = tuple(p - lr * g for p, g in zip(params, grads))
        new_loss, new_grads = _batch_loss_grad(cand, X, y)
        if not np.isfinite(new_loss) or not all(np.all(np.isfinite(p)) for p in cand):
            raise NumericError(f"ANN training diverged at epoch {epoch}")
        if new_loss <= loss:
            params, loss, grads = cand, new_loss, new_grads
        else:
            lr *= 0.5
        history.append(loss)
    w_in, w_out, b_hid, b_out = params
    return AnnModel(w_in, w_out, b_hid, float(b_out), 0.0, norm, tuple(history))


def ann_raw_score(model: AnnModel, v) -> float:
    return float(f_hid(ann_forward(model, v)))


def ann_raw_scores(model: AnnModel, X) -> np.ndarray:
    return f_hid(ann_forward_batch(model, X))


def ann_decide(model: AnnModel, v) -> int:
    return 1 if ann_raw_score(model, v) >= model.threshold else -1
