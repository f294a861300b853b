"""Linear dynamics with Gaussian kernel noise and a convex quadratic reward.

T(s, a) = A s + B a with the spectral norm of A scaled below 1; the
stochastic branch draws N(T(s, a), sigma^2 I), so the expected next state
equals T regardless of the mixing constant. Reward is the positive
quadratic s.Qs + a.Ra (Q, R positive semidefinite), which makes the value
function of any linear policy convex in the state - the setting in which
the true long-term reward dominates that of the expectation-transition
("augmented") process. The mixing coefficient is a constant, configurable
down to 0 for a purely stochastic environment with a smooth kernel.
"""

from __future__ import annotations

import numpy as np

from .base import Jacobians, MixedMdp

_MATRIX_SEED = 20240517  # fixed so every instance shares the same dynamics


def _default_matrices(state_dim: int, action_dim: int, spectral_norm: float):
    rng = np.random.default_rng(_MATRIX_SEED)
    a = rng.standard_normal((state_dim, state_dim))
    a *= spectral_norm / np.linalg.norm(a, ord=2)
    b = rng.uniform(-1.0, 1.0, size=(state_dim, action_dim))
    return a, b


class QuadraticConvexEnv(MixedMdp):
    def __init__(self, state_dim: int = 3, action_dim: int = 2, mixing: float = 0.5,
                 noise_sigma: float = 0.3, spectral_norm: float = 0.7,
                 max_episode_steps: int = 40):
        if not 0.0 <= mixing <= 1.0:
            raise ValueError("mixing must lie in [0, 1]")
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.mixing = float(mixing)
        self.noise_sigma = float(noise_sigma)
        self.max_episode_steps = max_episode_steps
        self.fully_deterministic = mixing >= 1.0
        self.action_low = np.full(action_dim, -np.inf)
        self.action_high = np.full(action_dim, np.inf)
        self.mat_a, self.mat_b = _default_matrices(state_dim, action_dim, spectral_norm)
        self.q = np.diag(np.linspace(0.5, 0.3, state_dim))
        self.r = np.eye(action_dim) * 0.1

    def reset(self, rng):
        return rng.uniform(-1.0, 1.0, size=self.state_dim)

    def deterministic_map(self, s, a):
        return self.mat_a @ s + self.mat_b @ a

    def mixing_coeff(self, s, a):
        return self.mixing

    def mixing_coeff_sup(self):
        return self.mixing

    def stochastic_sample(self, s, a, rng):
        mean = self.deterministic_map(s, a)
        return mean + self.noise_sigma * rng.standard_normal(self.state_dim)

    def stochastic_mean(self, s, a):
        return self.deterministic_map(s, a)

    def reward(self, s, a):
        return float(s @ self.q @ s + a @ self.r @ a)

    def jacobians(self, s, a):
        return Jacobians(
            jac_t_s=self.mat_a.copy(),
            jac_t_a=self.mat_b.copy(),
            grad_r_s=2.0 * (self.q @ s),
            grad_r_a=2.0 * (self.r @ a),
            grad_f_s=np.zeros(self.state_dim),
            grad_f_a=np.zeros(self.action_dim),
        )

    def kernel_grad_a_logp(self, s, a, s_next):
        resid = s_next - self.deterministic_map(s, a)
        return self.mat_b.T @ resid / self.noise_sigma ** 2

    def kernel_grad_s_logp(self, s, a, s_next):
        resid = s_next - self.deterministic_map(s, a)
        return self.mat_a.T @ resid / self.noise_sigma ** 2
