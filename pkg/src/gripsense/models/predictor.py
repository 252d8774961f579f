"""Recurrent slip/max-force predictor: one gated recurrent layer plus two
heads, trained with backpropagation through time written out by hand.

From a window of haptic feature vectors the model predicts, a fixed
horizon ahead: the probability that slip is occurring, the maximum
tactile force value, and the grid cell where it lands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optim import MomentumSGD
from .params import ParamLayout

GRID_MAX = 15  # highest row/col index of the tactile grid


@dataclass(frozen=True)
class PredictorConfig:
    input_dim: int = 38
    hidden: int = 32
    window: int = 20        # feature frames per prediction
    horizon: int = 10       # steps ahead the targets sit (50 ms at sim dt)
    seed: int = 0


@dataclass(frozen=True)
class PredictorTrainConfig:
    epochs: int = 8
    lr: float = 0.05
    batch: int = 64
    seed: int = 0
    momentum: float = 0.9
    clip_norm: float = 5.0


@dataclass(frozen=True)
class Prediction:
    slip_prob: float
    force_value: float          # N
    cell: tuple[int, int]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _layout(cfg: PredictorConfig) -> ParamLayout:
    d, h = cfg.input_dim, cfg.hidden
    return ParamLayout([
        ("Wz", (h, d)), ("Uz", (h, h)), ("bz", (h,)),
        ("Wr", (h, d)), ("Ur", (h, h)), ("br", (h,)),
        ("Wn", (h, d)), ("Un", (h, h)), ("bn", (h,)),
        ("ws", (h,)), ("bs", (1,)),
        ("wf", (h,)), ("bf", (1,)),
        ("Wc", (2, h)), ("bc", (2,)),
    ])


class SlipPredictor:
    def __init__(self, cfg: PredictorConfig = PredictorConfig(),
                 theta: np.ndarray | None = None, scope: str = "default",
                 motion: str = "", material: str | None = None):
        self.cfg = cfg
        self.layout = _layout(cfg)
        self.scope = scope
        self.motion = motion
        self.material = material
        if theta is not None:
            if len(theta) != self.layout.n_params:
                raise ValueError("parameter vector length mismatch")
            self.theta = np.asarray(theta, dtype=float).copy()
        else:
            self.theta = self._init_params(cfg.seed)
        self.input_mean = np.zeros(cfg.input_dim)
        self.input_std = np.ones(cfg.input_dim)
        self.force_mean = 0.0
        self.force_std = 1.0

    def _init_params(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        theta = self.layout.zeros()
        v = self.layout.views(theta)
        for name, arr in v.items():
            if name.startswith("b"):
                continue
            fan_in = arr.shape[-1] if arr.ndim > 1 else arr.shape[0]
            arr[...] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), arr.shape)
        return theta

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.input_mean) / self.input_std

    def forward(self, X: np.ndarray, want_cache: bool = False):
        """X: (B, W, input_dim) raw features. Returns (outputs, cache) where
        outputs = (slip_logit (B,), force_norm (B,), cell_norm (B, 2))."""
        cfg = self.cfg
        if X.ndim != 3 or X.shape[1] != cfg.window or X.shape[2] != cfg.input_dim:
            raise ValueError(f"expected (B, {cfg.window}, {cfg.input_dim}) window "
                             f"batch, got {X.shape}")
        v = self.layout.views(self.theta)
        x = self._normalize(X)
        B, W, _ = x.shape
        h = np.zeros((B, cfg.hidden))
        zs, rs, ns, hs = [], [], [], [np.zeros((B, cfg.hidden))]
        for t in range(W):
            xt = x[:, t]
            z = _sigmoid(xt @ v["Wz"].T + h @ v["Uz"].T + v["bz"])
            r = _sigmoid(xt @ v["Wr"].T + h @ v["Ur"].T + v["br"])
            n = np.tanh(xt @ v["Wn"].T + (r * h) @ v["Un"].T + v["bn"])
            h = (1.0 - z) * n + z * h
            if want_cache:
                zs.append(z); rs.append(r); ns.append(n); hs.append(h)
        slip_logit = h @ v["ws"] + v["bs"][0]
        force = h @ v["wf"] + v["bf"][0]
        cell = h @ v["Wc"].T + v["bc"]
        cache = (x, zs, rs, ns, hs) if want_cache else None
        return (slip_logit, force, cell), cache

    def loss_and_grad(self, X: np.ndarray, y_slip: np.ndarray,
                      y_force: np.ndarray, y_cell: np.ndarray):
        """Joint loss: BCE(slip) + MSE(normalized force) + MSE(normalized cell).

        Targets arrive in natural units (bool, N, grid indices) and are
        normalized with the model's stored statistics.
        """
        v = self.layout.views(self.theta)
        (slip_logit, force, cell), cache = self.forward(X, want_cache=True)
        x, zs, rs, ns, hs = cache
        B = len(X)
        ys = np.asarray(y_slip, dtype=float)
        yf = (np.asarray(y_force, dtype=float) - self.force_mean) / self.force_std
        yc = np.asarray(y_cell, dtype=float) / GRID_MAX

        # Stable BCE from logits.
        bce = np.maximum(slip_logit, 0.0) - slip_logit * ys + \
            np.log1p(np.exp(-np.abs(slip_logit)))
        mse_f = (force - yf) ** 2
        mse_c = ((cell - yc) ** 2).mean(axis=1)
        loss = float(np.mean(bce + mse_f + mse_c))

        grad = self.layout.zeros()
        gv = self.layout.views(grad)
        d_logit = (_sigmoid(slip_logit) - ys) / B
        d_force = 2.0 * (force - yf) / B
        d_cell = (cell - yc) / B  # 2/B * 1/2 from the component mean

        hW = hs[-1]
        gv["ws"][...] = hW.T @ d_logit
        gv["bs"][...] = d_logit.sum()
        gv["wf"][...] = hW.T @ d_force
        gv["bf"][...] = d_force.sum()
        gv["Wc"][...] = d_cell.T @ hW
        gv["bc"][...] = d_cell.sum(axis=0)
        dh = (d_logit[:, None] * v["ws"] + d_force[:, None] * v["wf"]
              + d_cell @ v["Wc"])

        for t in reversed(range(self.cfg.window)):
            z, r, n = zs[t], rs[t], ns[t]
            h_prev = hs[t]
            xt = x[:, t]
            dz = dh * (h_prev - n) * z * (1.0 - z)
            dn_pre = dh * (1.0 - z) * (1.0 - n ** 2)
            dr_pre = (dn_pre @ v["Un"]) * h_prev * r * (1.0 - r)
            gv["Wz"] += dz.T @ xt
            gv["Uz"] += dz.T @ h_prev
            gv["bz"] += dz.sum(axis=0)
            gv["Wr"] += dr_pre.T @ xt
            gv["Ur"] += dr_pre.T @ h_prev
            gv["br"] += dr_pre.sum(axis=0)
            gv["Wn"] += dn_pre.T @ xt
            gv["Un"] += dn_pre.T @ (r * h_prev)
            gv["bn"] += dn_pre.sum(axis=0)
            dh = (dh * z + dz @ v["Uz"] + dr_pre @ v["Ur"]
                  + (dn_pre @ v["Un"]) * r)
        return loss, grad


def train_predictor(X: np.ndarray, y_slip: np.ndarray, y_force: np.ndarray,
                    y_cell: np.ndarray, scope: str = "default",
                    motion: str = "shaking", material: str | None = None,
                    cfg: PredictorTrainConfig = PredictorTrainConfig(),
                    model_cfg: PredictorConfig | None = None) -> SlipPredictor:
    """Fit a predictor on windowed features with matched-step-count targets."""
    if scope not in ("default", "material"):
        raise ValueError(f"scope must be default or material, got {scope!r}")
    if scope == "material" and not material:
        raise ValueError("material scope requires a material name")
    if len(X) == 0:
        raise ValueError("empty predictor training set")
    model_cfg = model_cfg or PredictorConfig(window=X.shape[1],
                                             input_dim=X.shape[2], seed=cfg.seed)
    model = SlipPredictor(model_cfg, scope=scope, motion=motion,
                          material=material if scope == "material" else None)
    flat = X.reshape(-1, X.shape[2])
    model.input_mean = flat.mean(axis=0)
    model.input_std = np.maximum(flat.std(axis=0), 1e-6)
    model.force_mean = float(np.mean(y_force))
    model.force_std = float(max(np.std(y_force), 1e-6))

    opt = MomentumSGD(model.layout.n_params, cfg.lr, cfg.momentum, cfg.clip_norm)
    rng = np.random.default_rng(cfg.seed)
    n = len(X)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch):
            idx = order[lo:lo + cfg.batch]
            loss, grad = model.loss_and_grad(X[idx], y_slip[idx],
                                             y_force[idx], y_cell[idx])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}: {loss}")
            opt.update(model.theta, grad)
    return model


def predict(model: SlipPredictor, window) -> Prediction:
    """One forward pass over a FeatureWindow (or a (W, input_dim) array)."""
    mat = window.as_matrix() if hasattr(window, "as_matrix") else np.asarray(window)
    if mat.shape != (model.cfg.window, model.cfg.input_dim):
        raise ValueError(f"expected ({model.cfg.window}, {model.cfg.input_dim}) "
                         f"window, got {mat.shape}")
    (slip_logit, force, cell), _ = model.forward(mat[None])
    row = int(np.clip(round(cell[0, 0] * GRID_MAX), 0, GRID_MAX))
    col = int(np.clip(round(cell[0, 1] * GRID_MAX), 0, GRID_MAX))
    return Prediction(
        slip_prob=float(_sigmoid(slip_logit[0])),
        force_value=float(force[0] * model.force_std + model.force_mean),
        cell=(row, col),
    )


def predict_batch(model: SlipPredictor, X: np.ndarray):
    """Vectorized predict over (N, W, input_dim); returns arrays
    (slip_prob, force_value, cell_float)."""
    (slip_logit, force, cell), _ = model.forward(X)
    return (_sigmoid(slip_logit),
            force * model.force_std + model.force_mean,
            np.clip(cell * GRID_MAX, 0, GRID_MAX))
