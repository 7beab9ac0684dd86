from __future__ import annotations

import numpy as np


class OuProcess:
    """Discrete Ornstein-Uhlenbeck noise: x += theta * (mu - x) + sigma * N(0, 1)."""

    def __init__(self, size: int, theta: float = 0.15, mu: float = 0.0, sigma: float = 0.2,
                 rng: np.random.Generator | None = None, seed: int | None = None):
        if theta <= 0:
            raise ValueError("theta must be > 0")
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        self.size = size
        self.theta = theta
        self.mu = mu
        self.sigma = sigma
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.reset()

    def reset(self) -> None:
        self.x = np.full(self.size, float(self.mu))

    def step(self) -> np.ndarray:
        g = self.rng.standard_normal(self.size)
        self.x = self.x + self.theta * (self.mu - self.x) + self.sigma * g
        return self.x.copy()
