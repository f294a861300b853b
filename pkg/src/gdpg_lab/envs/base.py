"""Mixed-transition environment contract.

Each step moves to the deterministic map T(s, a) with probability f(s, a)
and otherwise draws from a stochastic kernel p(.|s, a). f identically 1
gives an ordinary deterministic environment; f identically 0 a purely
stochastic one. Environments own no RNG: every sampling method takes the
caller's generator, so trajectories are reproducible from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UnsupportedCapability(RuntimeError):
    """The environment does not provide the requested analytic structure."""


@dataclass
class Jacobians:
    """First derivatives of the map, reward, and mixing coefficient at (s, a).

    jac_t_s[i, j] = dT_i/ds_j and jac_t_a[i, j] = dT_i/da_j are plain
    Jacobians; the reward and mixing gradients are vectors. All are partial
    derivatives holding the other argument fixed.
    """

    jac_t_s: np.ndarray
    jac_t_a: np.ndarray
    grad_r_s: np.ndarray
    grad_r_a: np.ndarray
    grad_f_s: np.ndarray
    grad_f_a: np.ndarray


class MixedMdp:
    """Base class; subclasses fill in the capability set they support."""

    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int | None = None
    fully_deterministic: bool = False

    # -- capabilities ------------------------------------------------------

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def deterministic_map(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mixing_coeff(self, s: np.ndarray, a: np.ndarray) -> float:
        raise NotImplementedError

    def reward(self, s: np.ndarray, a: np.ndarray) -> float:
        raise NotImplementedError

    def stochastic_sample(self, s, a, rng: np.random.Generator) -> np.ndarray:
        raise UnsupportedCapability(f"{type(self).__name__} has no stochastic branch")

    def stochastic_mean(self, s, a) -> np.ndarray:
        raise UnsupportedCapability(f"{type(self).__name__} has no stochastic branch")

    def is_terminal(self, s: np.ndarray) -> bool:
        return False

    def jacobians(self, s: np.ndarray, a: np.ndarray) -> Jacobians:
        raise UnsupportedCapability(f"{type(self).__name__} has no analytic jacobians")

    def mixing_coeff_sup(self) -> float:
        """Supremum of f over states and the feasible action box."""
        raise UnsupportedCapability(f"{type(self).__name__} has no mixing bound")

    def kernel_grad_a_logp(self, s, a, s_next) -> np.ndarray:
        """d/da log p(s_next | s, a) for the stochastic kernel."""
        raise UnsupportedCapability(f"{type(self).__name__} has no kernel density")

    def kernel_grad_s_logp(self, s, a, s_next) -> np.ndarray:
        raise UnsupportedCapability(f"{type(self).__name__} has no kernel density")

    # -- derived behaviour -------------------------------------------------

    def _validate(self, s: np.ndarray, a: np.ndarray) -> None:
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite state")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite action")
        if np.any(a < self.action_low - 1e-9) or np.any(a > self.action_high + 1e-9):
            raise ValueError(f"action {a} outside the action box")

    def step(self, s: np.ndarray, a: np.ndarray,
             rng: np.random.Generator) -> tuple[np.ndarray, float, bool]:
        """One transition: T(s, a) with probability f(s, a), else the kernel.

        No generator draw happens when f == 1 exactly, so fully deterministic
        environments consume no randomness per step.
        """
        self._validate(s, a)
        f = self.mixing_coeff(s, a)
        if f >= 1.0:
            s_next = self.deterministic_map(s, a)
        elif f > 0.0 and rng.uniform() < f:
            s_next = self.deterministic_map(s, a)
        else:
            s_next = self.stochastic_sample(s, a, rng)
        r = self.reward(s, a)
        return s_next, r, self.is_terminal(s_next)

    def augmented_map(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Expected next state f*T + (1-f)*E[p(.|s,a)]; exactly T when f == 1."""
        self._validate(s, a)
        f = self.mixing_coeff(s, a)
        t = self.deterministic_map(s, a)
        if f >= 1.0:
            return t
        return f * t + (1.0 - f) * self.stochastic_mean(s, a)


def analytic_jacobians(env: MixedMdp, s: np.ndarray, a: np.ndarray) -> Jacobians:
    """Exact derivatives at (s, a); raises UnsupportedCapability if absent."""
    return env.jacobians(s, a)


def numeric_jacobians(env: MixedMdp, s: np.ndarray, a: np.ndarray,
                      h: float = 1e-6) -> Jacobians:
    """Central finite differences of T, r and f. Fallback for environments
    without analytic forms (and the cross-check oracle for those with them)."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    n, m = s.size, a.size

    def fd_map(fn, x, dim_out):
        jac = np.empty((dim_out, x.size))
        for j in range(x.size):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            jac[:, j] = (np.asarray(fn(xp)) - np.asarray(fn(xm))) / (2.0 * h)
        return jac

    jac_t_s = fd_map(lambda x: env.deterministic_map(x, a), s, n)
    jac_t_a = fd_map(lambda x: env.deterministic_map(s, x), a, n)
    grad_r_s = fd_map(lambda x: env.reward(x, a), s, 1)[0]
    grad_r_a = fd_map(lambda x: env.reward(s, x), a, 1)[0]
    grad_f_s = fd_map(lambda x: env.mixing_coeff(x, a), s, 1)[0]
    grad_f_a = fd_map(lambda x: env.mixing_coeff(s, x), a, 1)[0]
    return Jacobians(jac_t_s, jac_t_a, grad_r_s, grad_r_a, grad_f_s, grad_f_a)
