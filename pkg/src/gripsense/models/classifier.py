"""MFCC material classifier: a small 1-D CNN over the time axis.

Architecture: conv(k=3) -> ReLU -> maxpool(2) -> conv(k=3) -> ReLU ->
maxpool(2) -> global average pool -> affine -> 5-way softmax. Forward and
backward passes are written out explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..materials import MATERIAL_CLASSES
from .optim import MomentumSGD
from .params import ParamLayout
from . import metrics as _metrics


@dataclass(frozen=True)
class ClassifierConfig:
    n_coeffs: int = 13
    channels: tuple[int, int] = (16, 32)
    kernel: int = 3
    classes: tuple[str, ...] = MATERIAL_CLASSES
    seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 0.01
    batch: int = 32
    seed: int = 0
    momentum: float = 0.9
    clip_norm: float = 5.0


def _layout(cfg: ClassifierConfig) -> ParamLayout:
    c1, c2 = cfg.channels
    return ParamLayout([
        ("W1", (c1, cfg.n_coeffs, cfg.kernel)), ("b1", (c1,)),
        ("W2", (c2, c1, cfg.kernel)), ("b2", (c2,)),
        ("W3", (len(cfg.classes), c2)), ("b3", (len(cfg.classes),)),
    ])


class MaterialClassifier:
    def __init__(self, cfg: ClassifierConfig = ClassifierConfig(),
                 theta: np.ndarray | None = None):
        self.cfg = cfg
        self.layout = _layout(cfg)
        if theta is not None:
            if len(theta) != self.layout.n_params:
                raise ValueError("parameter vector length mismatch")
            self.theta = np.asarray(theta, dtype=float).copy()
        else:
            self.theta = self._init_params(cfg.seed)
        # Per-coefficient standardization fitted on the training set.
        self.input_mean = np.zeros(cfg.n_coeffs)
        self.input_std = np.ones(cfg.n_coeffs)

    def _init_params(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        theta = self.layout.zeros()
        v = self.layout.views(theta)
        for w in ("W1", "W2", "W3"):
            fan_in = int(np.prod(v[w].shape[1:]))
            v[w][...] = rng.normal(0.0, np.sqrt(2.0 / fan_in), v[w].shape)
        return theta

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.input_mean) / self.input_std

    def forward(self, x: np.ndarray, want_cache: bool = False):
        """x: (B, T, n_coeffs) raw MFCC frames. Returns (probs, cache)."""
        if x.ndim != 3 or x.shape[2] != self.cfg.n_coeffs:
            raise ValueError(f"expected (B, T, {self.cfg.n_coeffs}) input, got {x.shape}")
        v = self.layout.views(self.theta)
        h0 = self.standardize(x).transpose(0, 2, 1)  # (B, C0, T)
        z1 = _conv1d(h0, v["W1"], v["b1"])
        a1 = np.maximum(z1, 0.0)
        p1, arg1 = _maxpool2(a1)
        z2 = _conv1d(p1, v["W2"], v["b2"])
        a2 = np.maximum(z2, 0.0)
        p2, arg2 = _maxpool2(a2)
        g = p2.mean(axis=2)
        logits = g @ v["W3"].T + v["b3"]
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        cache = (h0, z1, a1, arg1, p1, z2, a2, arg2, p2, g, probs) if want_cache else None
        return probs, cache

    def loss_and_grad(self, x: np.ndarray, y: np.ndarray):
        """Mean cross-entropy and the flat parameter gradient."""
        v = self.layout.views(self.theta)
        probs, cache = self.forward(x, want_cache=True)
        h0, z1, a1, arg1, p1, z2, a2, arg2, p2, g, _ = cache
        B = len(x)
        eps = 1e-12
        loss = float(-np.mean(np.log(probs[np.arange(B), y] + eps)))

        grad = self.layout.zeros()
        gv = self.layout.views(grad)
        dlogits = probs.copy()
        dlogits[np.arange(B), y] -= 1.0
        dlogits /= B
        gv["W3"][...] = dlogits.T @ g
        gv["b3"][...] = dlogits.sum(axis=0)
        dg = dlogits @ v["W3"]
        dp2 = np.repeat(dg[:, :, None] / p2.shape[2], p2.shape[2], axis=2)
        da2 = _maxpool2_back(dp2, arg2, a2.shape)
        dz2 = da2 * (z2 > 0)
        dp1 = _conv1d_back(dz2, p1, v["W2"], gv["W2"], gv["b2"])
        da1 = _maxpool2_back(dp1, arg1, a1.shape)
        dz1 = da1 * (z1 > 0)
        _conv1d_back(dz1, h0, v["W1"], gv["W1"], gv["b1"])
        return loss, grad


def _conv1d(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid cross-correlation along time: x (B,Cin,T) * W (Cout,Cin,K)."""
    K = W.shape[2]
    To = x.shape[2] - K + 1
    y = np.broadcast_to(b[None, :, None], (x.shape[0], W.shape[0], To)).copy()
    for k in range(K):
        y += np.einsum("bct,oc->bot", x[:, :, k:k + To], W[:, :, k], optimize=True)
    return y


def _conv1d_back(dy: np.ndarray, x: np.ndarray, W: np.ndarray,
                 dW: np.ndarray, db: np.ndarray) -> np.ndarray:
    K = W.shape[2]
    To = dy.shape[2]
    db[...] = dy.sum(axis=(0, 2))
    dx = np.zeros_like(x)
    for k in range(K):
        dW[:, :, k] = np.einsum("bot,bct->oc", dy, x[:, :, k:k + To], optimize=True)
        dx[:, :, k:k + To] += np.einsum("bot,oc->bct", dy, W[:, :, k], optimize=True)
    return dx


def _maxpool2(x: np.ndarray):
    Tp = x.shape[2] // 2
    xr = x[:, :, :2 * Tp].reshape(x.shape[0], x.shape[1], Tp, 2)
    arg = xr.argmax(axis=3)
    return np.take_along_axis(xr, arg[..., None], axis=3)[..., 0], arg


def _maxpool2_back(dp: np.ndarray, arg: np.ndarray, x_shape: tuple) -> np.ndarray:
    B, C, T = x_shape
    Tp = dp.shape[2]
    dxr = np.zeros((B, C, Tp, 2))
    np.put_along_axis(dxr, arg[..., None], dp[..., None], axis=3)
    dx = np.zeros((B, C, T))
    dx[:, :, :2 * Tp] = dxr.reshape(B, C, 2 * Tp)
    return dx


def _to_arrays(dataset, classes: tuple[str, ...]):
    xs, ys = [], []
    index = {name: i for i, name in enumerate(classes)}
    for item, label in dataset:
        frames = item.frames if hasattr(item, "frames") else np.asarray(item)
        xs.append(frames)
        ys.append(index[label])
    return np.stack(xs), np.asarray(ys)


def train_classifier(train_set, val_set, cfg: TrainConfig = TrainConfig(),
                     model_cfg: ClassifierConfig | None = None):
    """Minibatch SGD with momentum on cross-entropy; returns the model with
    the best validation-accuracy weights plus held-out Metrics."""
    model_cfg = model_cfg or ClassifierConfig(seed=cfg.seed)
    x_train, y_train = _to_arrays(train_set, model_cfg.classes)
    x_val, y_val = _to_arrays(val_set, model_cfg.classes)
    present = set(y_train.tolist())
    missing = [c for i, c in enumerate(model_cfg.classes) if i not in present]
    if missing:
        raise ValueError(f"training split is missing classes: {missing}")

    model = MaterialClassifier(model_cfg)
    flat = x_train.reshape(-1, model_cfg.n_coeffs)
    model.input_mean = flat.mean(axis=0)
    model.input_std = np.maximum(flat.std(axis=0), 1e-6)

    opt = MomentumSGD(model.layout.n_params, cfg.lr, cfg.momentum, cfg.clip_norm)
    rng = np.random.default_rng(cfg.seed)
    best_theta = model.theta.copy()
    best_acc = -1.0
    n = len(x_train)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch):
            idx = order[lo:lo + cfg.batch]
            loss, grad = model.loss_and_grad(x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}: {loss}")
            opt.update(model.theta, grad)
        probs, _ = model.forward(x_val)
        acc = _metrics.accuracy(probs.argmax(axis=1), y_val)
        if acc > best_acc:
            best_acc = acc
            best_theta = model.theta.copy()
    model.theta = best_theta
    probs, _ = model.forward(x_val)
    pred = probs.argmax(axis=1)
    cm = _metrics.confusion_matrix(pred, y_val, len(model_cfg.classes))
    prec, rec = _metrics.precision_recall(cm)
    result = _metrics.Metrics(accuracy=_metrics.accuracy(pred, y_val),
                              precision=prec, recall=rec, confusion=cm)
    return model, result


def classify(model: MaterialClassifier, mfcc_matrix) -> np.ndarray:
    """Probability vector over the model's classes for one MFCC matrix."""
    frames = (mfcc_matrix.frames if hasattr(mfcc_matrix, "frames")
              else np.asarray(mfcc_matrix))
    if frames.ndim != 2 or frames.shape[1] != model.cfg.n_coeffs:
        raise ValueError(f"expected (T, {model.cfg.n_coeffs}) MFCC matrix, "
                         f"got {frames.shape}")
    probs, _ = model.forward(frames[None])
    return probs[0]
