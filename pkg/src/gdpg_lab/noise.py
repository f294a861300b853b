"""Exploration noise, generated in normalized action units (box half-widths)."""

from __future__ import annotations

import numpy as np


class OrnsteinUhlenbeckNoise:
    """Mean-reverting noise x += theta*(mu - x) + sigma*N(0, I), dt = 1."""

    def __init__(self, size: int, theta: float = 0.15, sigma: float = 0.2, mu: float = 0.0):
        self.size = size
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.x = np.full(size, mu, dtype=np.float64)

    def reset(self) -> None:
        self.x[:] = self.mu

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        self.x += self.theta * (self.mu - self.x) + self.sigma * rng.standard_normal(self.size)
        return self.x.copy()


class GaussianNoise:
    """Uncorrelated N(0, sigma^2) noise."""

    def __init__(self, size: int, sigma: float = 0.1):
        self.size = size
        self.sigma = sigma

    def reset(self) -> None:
        pass

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sigma * rng.standard_normal(self.size)
