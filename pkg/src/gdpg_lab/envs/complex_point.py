"""Point-control task in 5-D with action-controlled transition mixing.

The agent lives in R^5 and proposes displacements a in [-0.1, 0.1]^5. The
move succeeds deterministically (s' = s + a) with probability
f(s, a) = ||a||^2 / 0.05, which reaches 1 exactly at the corners of the
action box; otherwise the agent is re-drawn uniformly from [-1, 1]^5.
Reward is -||s + a||, the distance the intended move leaves to the origin.
Episodes end inside a small ball around the origin or after 100 steps.
"""

from __future__ import annotations

import numpy as np

from .base import Jacobians, MixedMdp

F_NORMALIZER = 0.05  # ||a||^2 at the action-box corners


class ComplexPointEnv(MixedMdp):
    """5-D point environment with mixed deterministic/uniform transitions.

    ``force_deterministic=True`` builds the variant with f pinned to 1 and no
    termination region, used to exercise purely deterministic gradient paths
    on the same dynamics and reward.
    """

    state_dim = 5
    action_dim = 5

    def __init__(self, termination_radius: float = 0.05, max_episode_steps: int = 100,
                 force_deterministic: bool = False):
        self.action_low = np.full(5, -0.1)
        self.action_high = np.full(5, 0.1)
        self.termination_radius = termination_radius
        self.max_episode_steps = max_episode_steps
        self.force_deterministic = force_deterministic
        self.fully_deterministic = force_deterministic

    def reset(self, rng):
        return rng.uniform(-1.0, 1.0, size=5)

    def deterministic_map(self, s, a):
        return s + a

    def mixing_coeff(self, s, a):
        if self.force_deterministic:
            return 1.0
        return min(1.0, float(a @ a) / F_NORMALIZER)

    def mixing_coeff_sup(self):
        # ||a||^2 <= 5 * 0.1^2 = 0.05 over the box, attained at the corners.
        return 1.0

    def stochastic_sample(self, s, a, rng):
        return rng.uniform(-1.0, 1.0, size=5)

    def stochastic_mean(self, s, a):
        return np.zeros(5)

    def reward(self, s, a):
        return -float(np.linalg.norm(s + a))

    def is_terminal(self, s):
        if self.force_deterministic:
            return False
        return float(np.linalg.norm(s)) < self.termination_radius

    def jacobians(self, s, a):
        eye = np.eye(5)
        sa = s + a
        norm = np.linalg.norm(sa)
        if norm > 0.0:
            grad_r = -sa / norm
        else:
            grad_r = np.zeros(5)  # reward has a kink at the origin
        if self.force_deterministic:
            grad_f_a = np.zeros(5)
        else:
            grad_f_a = 2.0 * a / F_NORMALIZER
        return Jacobians(
            jac_t_s=eye,
            jac_t_a=eye.copy(),
            grad_r_s=grad_r,
            grad_r_a=grad_r.copy(),
            grad_f_s=np.zeros(5),
            grad_f_a=grad_f_a,
        )

    def kernel_grad_a_logp(self, s, a, s_next):
        # The uniform branch does not depend on the action.
        return np.zeros(5)

    def kernel_grad_s_logp(self, s, a, s_next):
        return np.zeros(5)
