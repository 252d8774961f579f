"""Flat parameter vectors with named reshaped views.

Models keep all weights in one contiguous float64 vector so that
serialization, finite-difference checks, and the optimizer can treat
parameters uniformly; layers see named views into the same buffer.
"""

from __future__ import annotations

import numpy as np


class ParamLayout:
    def __init__(self, spec: list[tuple[str, tuple[int, ...]]]):
        self.entries = []
        offset = 0
        for name, shape in spec:
            size = int(np.prod(shape))
            self.entries.append((name, shape, offset, size))
            offset += size
        self.n_params = offset
        self._by_name = {name: (shape, off, size)
                         for name, shape, off, size in self.entries}

    def view(self, theta: np.ndarray, name: str) -> np.ndarray:
        shape, off, size = self._by_name[name]
        return theta[off:off + size].reshape(shape)

    def views(self, theta: np.ndarray) -> dict[str, np.ndarray]:
        return {name: self.view(theta, name) for name, _, _, _ in self.entries}

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_params)
