"""Two-dimensional linear environment whose value-gradient series has a
known convergence threshold.

T(s, a) = (2s1 + 2s2 + a1, 2s1 + 2s2 + a2) and r(s, a) = -s.a, fully
deterministic. The state Jacobian of T is the constant matrix
[[2, 2], [2, 2]] (eigenvalues 0 and 4), so under a constant policy the
discounted Jacobian-chain series behaves like a geometric series with
ratio 4*gamma: it converges exactly when gamma < 1/4.
"""

from __future__ import annotations

import numpy as np

from .base import Jacobians, MixedMdp

JAC_T_S = np.array([[2.0, 2.0], [2.0, 2.0]])


class LinearExample1Env(MixedMdp):
    state_dim = 2
    action_dim = 2
    fully_deterministic = True
    max_episode_steps = None

    def __init__(self):
        self.action_low = np.full(2, -np.inf)
        self.action_high = np.full(2, np.inf)

    def reset(self, rng):
        return rng.uniform(-1.0, 1.0, size=2)

    def deterministic_map(self, s, a):
        lin = 2.0 * (s[0] + s[1])
        return np.array([lin + a[0], lin + a[1]])

    def mixing_coeff(self, s, a):
        return 1.0

    def mixing_coeff_sup(self):
        return 1.0

    def reward(self, s, a):
        return -float(s @ a)

    def jacobians(self, s, a):
        return Jacobians(
            jac_t_s=JAC_T_S.copy(),
            jac_t_a=np.eye(2),
            grad_r_s=-np.asarray(a, dtype=np.float64),
            grad_r_a=-np.asarray(s, dtype=np.float64),
            grad_f_s=np.zeros(2),
            grad_f_a=np.zeros(2),
        )
