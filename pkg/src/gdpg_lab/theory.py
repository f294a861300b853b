"""Numerical gradient-existence analysis and policy-gradient estimators for
mixed deterministic/stochastic transitions.

The central objects are discounted Jacobian-chain series: along a
deterministic rollout the state-gradient of the value function is

    grad_s V(s0) = sum_t gamma^t [prod_{i<t} f_i D_i]^T b_t

where D_i is the (total) state-to-state Jacobian at step i, f_i the mixing
coefficient, and b_t collects the per-step reward/mixing/kernel gradients.
Whether that series converges is governed by the chain's growth: with n the
state dimension and c the largest max-norm of the per-step Jacobians, any
discount below 1/(n c) is safe; mixing bounds or chain eigenvalue bounds
extend this to every discount. ``convergence_report`` checks those
conditions numerically on sampled states and chains.

The policy-gradient estimators decompose d J / d theta by the policy's
appearance at each step, which makes the deterministic estimator exact for
the truncated rollout objective; the general estimator adds the
kernel-score and mixing-gradient routes, each skipped when its coefficient
is exactly zero so degenerate mixtures reduce term-for-term to the
specialized estimators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs.base import MixedMdp, UnsupportedCapability, analytic_jacobians, numeric_jacobians
from .linalg import spectral_radius

DIVERGENCE_THRESHOLD = 1e12


def _jac_fn(mode):
    if mode == "analytic":
        return analytic_jacobians
    if mode == "numeric":
        return numeric_jacobians
    raise ValueError(f"unknown jacobian mode {mode!r}")


# ---------------------------------------------------------------------------
# closed-form series for the linear_example1 environment


def example1_grad_value(theta, gamma: float, terms: int,
                        divergence_threshold: float = DIVERGENCE_THRESHOLD):
    """Partial sum of the value-gradient series for linear_example1 under the
    constant policy theta.

    Returns ``(partial_sum, diverged)`` where the partial sum is
    -(I + sum_{k=1..terms} gamma^k M_k) theta with M_k the rank-one chain
    matrix whose entries are 2^(2k-1). The flag tracks the matrix series
    itself (entries against ``divergence_threshold``), so a zero policy
    still reports divergence. Accumulation stops once the threshold trips.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (2,):
        raise ValueError("theta must be a 2-vector")
    if not np.all(np.isfinite(theta)) or not np.isfinite(gamma):
        raise ValueError("non-finite input")
    if terms < 1:
        raise ValueError("terms must be >= 1")
    # gamma^k 2^(2k-1) = 2 gamma (4 gamma)^(k-1): a geometric scalar series.
    sig = 0.0
    term = 2.0 * gamma
    diverged = False
    for _ in range(terms):
        sig += term
        if abs(sig) > divergence_threshold or not np.isfinite(sig):
            diverged = True
            break
        term *= 4.0 * gamma
    partial = -(theta + sig * (theta[0] + theta[1]) * np.ones(2))
    return partial, diverged


def example1_series_limit(theta, gamma: float) -> np.ndarray:
    """Closed form of the full series for gamma < 1/4 (geometric sum)."""
    if not gamma < 0.25:
        raise ValueError("closed form only exists for gamma < 1/4")
    theta = np.asarray(theta, dtype=np.float64)
    sig = 2.0 * gamma / (1.0 - 4.0 * gamma)
    return -(theta + sig * (theta[0] + theta[1]) * np.ones(2))


# ---------------------------------------------------------------------------
# sampled convergence conditions


@dataclass
class JacobianChain:
    """Per-step matrices f(s_i, mu(s_i)) dT/ds_i along a deterministic
    rollout, and their left-to-right product."""

    matrices: list[np.ndarray]
    product: np.ndarray

    @classmethod
    def from_rollout(cls, env: MixedMdp, policy, s0, length: int,
                     jacobian_mode: str = "analytic") -> "JacobianChain":
        jac = _jac_fn(jacobian_mode)
        s = np.asarray(s0, dtype=np.float64)
        mats = []
        prod = np.eye(env.state_dim)
        for _ in range(length):
            a = policy.act(s)
            j = jac(env, s, a)
            factor = env.mixing_coeff(s, a) * j.jac_t_s
            mats.append(factor)
            prod = prod @ factor
            s = env.deterministic_map(s, a)
        return cls(mats, prod)


@dataclass
class ConvergenceReport:
    """Sampled verdicts for the gradient-existence conditions.

    ``c`` is the largest max-norm of dT/ds over the sampled states (the
    partial Jacobian at a = mu(s)); the safe-discount threshold is 1/(n c).
    ``cond_a1`` compares the mixing bound against that threshold;
    ``cond_a2`` bounds the spectral radius of every sampled chain prefix by
    1. Both are sampled semidecisions, not proofs.
    """

    n: int
    c: float
    gamma_threshold: float
    f_max: float
    f_max_source: str
    cond_a1: bool
    cond_a1_margin: float
    cond_a2: bool
    cond_a2_worst_radius: float
    samples_used: int
    chain_length: int

    def as_kv_text(self) -> str:
        lines = [
            f"n={self.n}",
            f"c={self.c:.9g}",
            f"gamma_threshold={self.gamma_threshold:.9g}",
            f"f_max={self.f_max:.9g}",
            f"f_max_source={self.f_max_source}",
            f"cond_a1={str(self.cond_a1).lower()}",
            f"cond_a1_margin={self.cond_a1_margin:.9g}",
            f"cond_a2={str(self.cond_a2).lower()}",
            f"cond_a2_worst_radius={self.cond_a2_worst_radius:.9g}",
            f"samples_used={self.samples_used}",
            f"chain_length={self.chain_length}",
        ]
        return "\n".join(lines) + "\n"


def convergence_report(env: MixedMdp, policy, state_samples: int = 32,
                       chain_length: int = 8, rng=None,
                       jacobian_mode: str = "analytic",
                       radius_slack: float = 1e-9) -> ConvergenceReport:
    """Estimate n, c, the discount threshold and the two all-discount
    conditions from states drawn from the initial distribution.

    The mixing bound uses the environment's exact supremum over the action
    box when it provides one (sound for any policy); otherwise it falls back
    to the sampled on-policy maximum of f(s, mu(s)).
    """
    if state_samples < 1:
        raise ValueError("state_samples must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    jac = _jac_fn(jacobian_mode)
    n = env.state_dim

    states = [env.reset(rng) for _ in range(state_samples)]
    c = 0.0
    f_on_policy = 0.0
    for s in states:
        a = policy.act(s)
        j = jac(env, s, a)
        c = max(c, float(np.max(np.abs(j.jac_t_s))))
        f_on_policy = max(f_on_policy, float(env.mixing_coeff(s, a)))

    gamma_threshold = np.inf if c == 0.0 else 1.0 / (n * c)
    try:
        f_max = float(env.mixing_coeff_sup())
        f_max_source = "action_box_sup"
    except UnsupportedCapability:
        f_max = f_on_policy
        f_max_source = "on_policy_samples"
    cond_a1_margin = gamma_threshold - f_max
    cond_a1 = f_max <= gamma_threshold

    worst = 0.0
    for s0 in states:
        s = np.asarray(s0, dtype=np.float64)
        prod = np.eye(n)
        for _ in range(chain_length):
            a = policy.act(s)
            j = jac(env, s, a)
            prod = prod @ (env.mixing_coeff(s, a) * j.jac_t_s)
            worst = max(worst, spectral_radius(prod))
            s = env.deterministic_map(s, a)
    cond_a2 = worst <= 1.0 + radius_slack

    return ConvergenceReport(
        n=n, c=c, gamma_threshold=gamma_threshold,
        f_max=f_max, f_max_source=f_max_source,
        cond_a1=cond_a1, cond_a1_margin=cond_a1_margin,
        cond_a2=cond_a2, cond_a2_worst_radius=worst,
        samples_used=state_samples, chain_length=chain_length,
    )


# ---------------------------------------------------------------------------
# value-gradient series along deterministic rollouts


def series_grad_value(env: MixedMdp, policy, s, gamma: float, horizon: int,
                      rng=None, jacobian_mode: str = "analytic") -> np.ndarray:
    """Truncated series for grad_s V(s) on a fully deterministic environment.

    Accumulates gamma^t (chain of per-step total Jacobians)^T times the total
    reward gradient along the rollout from s. ``horizon`` counts reward
    terms; horizon 1 returns the total gradient of r(s, mu(s)) alone.
    """
    if not env.fully_deterministic:
        raise UnsupportedCapability("series_grad_value requires a fully deterministic env")
    jac = _jac_fn(jacobian_mode)
    s = np.asarray(s, dtype=np.float64).copy()
    n = env.state_dim
    out = np.zeros(n)
    g_t = np.eye(n)
    disc = 1.0
    for t in range(horizon):
        pa = policy.at(s)
        a = pa.action
        j = jac(env, s, a)
        jmu = pa.jac_state()
        total_dr = j.grad_r_s + jmu.T @ j.grad_r_a
        out += disc * (g_t @ total_dr)
        if t == horizon - 1:
            break
        d_total = j.jac_t_s + j.jac_t_a @ jmu
        g_t = g_t @ d_total.T
        disc *= gamma
        s = env.deterministic_map(s, a)
        if env.is_terminal(s):
            break
    return out


def mc_value(env: MixedMdp, policy, s, gamma: float, rollouts: int,
             horizon: int, rng) -> float:
    """Monte-Carlo state value: mean discounted return over rollouts of the
    true environment following the policy from s."""
    total = 0.0
    for _ in range(rollouts):
        si = np.asarray(s, dtype=np.float64)
        disc = 1.0
        acc = 0.0
        for _ in range(horizon):
            a = policy.act(si)
            si, r, done = env.step(si, a, rng)
            acc += disc * r
            disc *= gamma
            if done:
                break
        total += acc
    return total / rollouts


def _kernel_score_estimate(env, policy, s, a, gamma, kernel_samples, v_rollouts,
                           horizon, rng):
    """Sample the stochastic branch: returns (mean of grad_a log p times the
    sampled value, mean sampled value). Shared by the general and the
    stochastic-only estimators so their draws align exactly."""
    score_acc = np.zeros(env.action_dim)
    v_acc = 0.0
    for _ in range(kernel_samples):
        sp = env.stochastic_sample(s, a, rng)
        v = mc_value(env, policy, sp, gamma, v_rollouts, horizon, rng) if horizon > 0 else 0.0
        score_acc += env.kernel_grad_a_logp(s, a, sp) * v
        v_acc += v
    return score_acc / kernel_samples, v_acc / kernel_samples


def series_grad_value_general(env: MixedMdp, policy, s, gamma: float, horizon: int,
                              rng, v_rollouts: int = 32, kernel_samples: int = 8,
                              jacobian_mode: str = "analytic") -> np.ndarray:
    """grad_s V(s) series for mixed transitions.

    The chain follows the deterministic map with factors f_i D_i; the
    per-step integrand adds the mixing-gradient and kernel-score routes,
    estimated by Monte Carlo, each skipped when its coefficient is exactly
    zero. With f identically 1 this produces bit-identical arithmetic to
    ``series_grad_value``.
    """
    jac = _jac_fn(jacobian_mode)
    s = np.asarray(s, dtype=np.float64).copy()
    n = env.state_dim
    out = np.zeros(n)
    g_t = np.eye(n)
    disc = 1.0
    for t in range(horizon):
        pa = policy.at(s)
        a = pa.action
        f = float(env.mixing_coeff(s, a))
        j = jac(env, s, a)
        jmu = pa.jac_state()
        b = j.grad_r_s + jmu.T @ j.grad_r_a
        rem = horizon - t - 1
        if gamma != 0.0 and rem > 0:
            total_grad_f = j.grad_f_s + jmu.T @ j.grad_f_a
            need_f_terms = bool(np.any(total_grad_f != 0.0))
            need_kernel = (1.0 - f) > 0.0 or need_f_terms
            if need_kernel:
                score_s_acc = np.zeros(n)
                v_acc = 0.0
                for _ in range(kernel_samples):
                    sp = env.stochastic_sample(s, a, rng)
                    v = mc_value(env, policy, sp, gamma, v_rollouts, rem, rng)
                    total_score = env.kernel_grad_s_logp(s, a, sp) \
                        + jmu.T @ env.kernel_grad_a_logp(s, a, sp)
                    score_s_acc += total_score * v
                    v_acc += v
                if (1.0 - f) > 0.0:
                    b = b + (gamma * (1.0 - f)) * (score_s_acc / kernel_samples)
                if need_f_terms:
                    v_det = mc_value(env, policy, env.deterministic_map(s, a), gamma,
                                     v_rollouts, rem, rng)
                    b = b + (gamma * (v_det - v_acc / kernel_samples)) * total_grad_f
        out += disc * (g_t @ b)
        if t == horizon - 1:
            break
        if f == 0.0:
            break  # every later chain factor carries f = 0
        d_total = j.jac_t_s + j.jac_t_a @ jmu
        g_t = g_t @ (f * d_total).T
        disc *= gamma
        s = env.deterministic_map(s, a)
        if env.is_terminal(s):
            break
    return out


# ---------------------------------------------------------------------------
# policy-gradient estimators


def policy_gradient_deterministic(env: MixedMdp, policy, gamma: float,
                                  rollouts: int, horizon: int, rng,
                                  jacobian_mode: str = "analytic",
                                  trace: list | None = None) -> np.ndarray:
    """Policy gradient on a fully deterministic environment.

    Start states come from the initial distribution; each step contributes
    gamma^t dmu/dtheta . (grad_a r + gamma dT/da^T grad_s V) with the value
    gradient taken over the remaining horizon, making the estimate exact for
    the horizon-truncated objective up to start-state sampling.
    """
    if not env.fully_deterministic:
        raise UnsupportedCapability("policy_gradient_deterministic requires f == 1")
    jac = _jac_fn(jacobian_mode)
    acc = np.zeros(policy.num_params)
    for k in range(rollouts):
        s = env.reset(rng)
        disc = 1.0
        for t in range(horizon):
            pa = policy.at(s)
            a = pa.action
            j = jac(env, s, a)
            s_next = env.deterministic_map(s, a)
            u = j.grad_r_a.copy()
            rem = horizon - t - 1
            if gamma != 0.0 and rem > 0:
                gv = series_grad_value(env, policy, s_next, gamma, rem,
                                       jacobian_mode=jacobian_mode)
                u += gamma * (j.jac_t_a.T @ gv)
            acc += disc * pa.grad_params_dot(u)
            if trace is not None:
                trace.append((k, t, disc, u.copy()))
            disc *= gamma
            s = s_next
            if env.is_terminal(s):
                break
    return acc / rollouts


def policy_gradient_stochastic(env: MixedMdp, policy, gamma: float,
                               rollouts: int, horizon: int, rng,
                               kernel_samples: int = 8, v_rollouts: int = 32,
                               jacobian_mode: str = "analytic",
                               trace: list | None = None) -> np.ndarray:
    """Policy gradient for a purely stochastic environment (f == 0) with a
    differentiable kernel density, via the kernel-score route."""
    jac = _jac_fn(jacobian_mode)
    acc = np.zeros(policy.num_params)
    for k in range(rollouts):
        s = env.reset(rng)
        disc = 1.0
        for t in range(horizon):
            pa = policy.at(s)
            a = pa.action
            j = jac(env, s, a)
            u = j.grad_r_a.copy()
            rem = horizon - t - 1
            if gamma != 0.0 and rem > 0:
                score_mean, _ = _kernel_score_estimate(env, policy, s, a, gamma,
                                                       kernel_samples, v_rollouts, rem, rng)
                u += gamma * score_mean
            acc += disc * pa.grad_params_dot(u)
            if trace is not None:
                trace.append((k, t, disc, u.copy()))
            s, _, done = env.step(s, a, rng)
            disc *= gamma
            if done:
                break
    return acc / rollouts


def policy_gradient_general(env: MixedMdp, policy, gamma: float,
                            rollouts: int, horizon: int, rng,
                            kernel_samples: int = 8, v_rollouts: int = 32,
                            jacobian_mode: str = "analytic",
                            trace: list | None = None) -> np.ndarray:
    """Policy gradient for mixed transitions: reward, deterministic-branch,
    kernel-score and mixing-gradient routes along on-policy rollouts.

    Routes with exactly zero coefficients are skipped rather than multiplied
    in, so f == 1 reproduces ``policy_gradient_deterministic`` and constant
    f == 0 reproduces ``policy_gradient_stochastic`` term for term under a
    shared generator.
    """
    jac = _jac_fn(jacobian_mode)
    acc = np.zeros(policy.num_params)
    for k in range(rollouts):
        s = env.reset(rng)
        disc = 1.0
        for t in range(horizon):
            pa = policy.at(s)
            a = pa.action
            f = float(env.mixing_coeff(s, a))
            j = jac(env, s, a)
            u = j.grad_r_a.copy()
            rem = horizon - t - 1
            if gamma != 0.0 and rem > 0:
                if f > 0.0:
                    s_det = env.deterministic_map(s, a)
                    gv = series_grad_value_general(env, policy, s_det, gamma, rem, rng,
                                                   v_rollouts=v_rollouts,
                                                   kernel_samples=kernel_samples,
                                                   jacobian_mode=jacobian_mode)
                    u += (gamma * f) * (j.jac_t_a.T @ gv)
                need_f_terms = bool(np.any(j.grad_f_a != 0.0))
                if (1.0 - f) > 0.0 or need_f_terms:
                    score_mean, v_mean = _kernel_score_estimate(
                        env, policy, s, a, gamma, kernel_samples, v_rollouts, rem, rng)
                    if (1.0 - f) > 0.0:
                        u += (gamma * (1.0 - f)) * score_mean
                    if need_f_terms:
                        v_det = mc_value(env, policy, env.deterministic_map(s, a), gamma,
                                         v_rollouts, rem, rng)
                        u += (gamma * (v_det - v_mean)) * j.grad_f_a
            acc += disc * pa.grad_params_dot(u)
            if trace is not None:
                trace.append((k, t, disc, u.copy()))
            s, _, done = env.step(s, a, rng)
            disc *= gamma
            if done:
                break
    return acc / rollouts


# ---------------------------------------------------------------------------
# Monte-Carlo objectives


def mc_episode_returns(env: MixedMdp, policy, gamma: float, episodes: int,
                       horizon: int, rng, transition: str = "true") -> np.ndarray:
    """Per-episode discounted returns following the policy without noise.

    ``transition="true"`` steps the environment; ``transition="augmented"``
    rolls the deterministic expected-next-state map with the same reward and
    termination rule.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if transition not in ("true", "augmented"):
        raise ValueError(f"unknown transition kind {transition!r}")
    if env.max_episode_steps is not None:
        horizon = min(horizon, env.max_episode_steps)
    out = np.empty(episodes)
    for e in range(episodes):
        s = env.reset(rng)
        disc = 1.0
        acc = 0.0
        for _ in range(horizon):
            a = policy.act(s)
            if transition == "true":
                s, r, done = env.step(s, a, rng)
            else:
                r = env.reward(s, a)
                s = env.augmented_map(s, a)
                done = env.is_terminal(s)
            acc += disc * r
            disc *= gamma
            if done:
                break
        out[e] = acc
    return out


def mc_return(env, policy, gamma, episodes, horizon, rng) -> float:
    """Monte-Carlo estimate of the discounted objective."""
    return float(np.mean(mc_episode_returns(env, policy, gamma, episodes, horizon, rng,
                                            transition="true")))


def mc_return_augmented(env, policy, gamma, episodes, horizon, rng) -> float:
    """Monte-Carlo objective of the expectation-transition process."""
    return float(np.mean(mc_episode_returns(env, policy, gamma, episodes, horizon, rng,
                                            transition="augmented")))
