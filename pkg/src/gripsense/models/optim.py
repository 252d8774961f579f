"""Minibatch SGD with classical momentum and global-norm gradient clipping."""

from __future__ import annotations

import numpy as np


class MomentumSGD:
    def __init__(self, n_params: int, lr: float, momentum: float = 0.9,
                 clip_norm: float | None = 5.0):
        self.lr = lr
        self.momentum = momentum
        self.clip_norm = clip_norm
        self.velocity = np.zeros(n_params)

    def update(self, theta: np.ndarray, grad: np.ndarray) -> None:
        if self.clip_norm is not None:
            norm = float(np.linalg.norm(grad))
            if norm > self.clip_norm:
                grad = grad * (self.clip_norm / norm)
        self.velocity *= self.momentum
        self.velocity -= self.lr * grad
        theta += self.velocity
