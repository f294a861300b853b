"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The alpha-sweep criterion
trains 20 full runs and dominates the wall time; everything else finishes in
a few minutes combined.
"""

import time

import numpy as np
import pytest

from gdpg_lab.agent import GdpgConfig, init_gdpg_state, train, transition_update
from gdpg_lab.envs import ComplexPointEnv, QuadraticConvexEnv
from gdpg_lab.harness import ExperimentConfig, analyze, run, sweep_alpha
from gdpg_lab.nets import flatten_grads, flatten_params, init_mlp, mlp_forward, \
    mlp_grad_input, mlp_grad_params, set_flat_params
from gdpg_lab.policies import LinearPolicy, MlpPolicy
from gdpg_lab.theory import (convergence_report, example1_grad_value, mc_episode_returns,
                             policy_gradient_deterministic, policy_gradient_general,
                             policy_gradient_stochastic)
from oracles import fd_directional, rollout_objective


def report(number: int, passed: bool, detail: str) -> None:
    print(f"[criterion {number:2d}] {'PASS' if passed else 'FAIL'} - {detail}")


def timed(fn):
    t0 = time.time()
    out = fn()
    return out, time.time() - t0


GRID = [round(0.05 * k, 2) for k in range(1, 10)]

# criterion 8 experiment: the paper-configured agent at desk scale
SWEEP_ALPHAS = [0.0, 0.5, 1.0, 2.0]
SWEEP_SEEDS = (0, 1, 2, 3, 4)
SWEEP_STEPS = 50_000


def test_criterion_01_linear_example1_threshold(tmp_path):
    ok = False
    rel, elapsed = float("nan"), float("nan")
    try:
        result, elapsed = timed(lambda: analyze("linear_example1", GRID, str(tmp_path)))
        verdicts = dict(result.verdicts)
        for g in GRID:
            if g < 0.25:
                assert verdicts[g] == "converged", (g, verdicts[g])
            elif g > 0.25:
                assert verdicts[g] == "diverged", (g, verdicts[g])
        theta = np.array([1.0, 1.0])
        p60, diverged = example1_grad_value(theta, 0.2, 60)
        assert not diverged
        # scalar geometric oracle: sum_{k<=60} gamma^k 2^(2k-1)
        #   = 2 gamma (1 - (4 gamma)^60) / (1 - 4 gamma)
        sig = 2.0 * 0.2 * (1.0 - 0.8 ** 60) / (1.0 - 0.8)
        oracle = -(theta + sig * (theta[0] + theta[1]) * np.ones(2))
        rel = float(np.max(np.abs(p60 - oracle) / np.abs(oracle)))
        assert rel < 1e-6, rel
        ok = True
    finally:
        report(1, ok, f"grid verdicts + 60-term series vs geometric oracle "
                      f"(rel {rel:.2e}), {elapsed:.2f}s")
    assert elapsed < 1.0, f"analyze took {elapsed:.2f}s (budget 1s)"


SHAPES = [
    ("actor", [5, 64, 64, 5], "tanh", 0.1),
    ("critic", [10, 64, 64, 1], "identity", 1.0),
    ("transition", [10, 64, 64, 5], "identity", 1.0),
    ("small_actor", [5, 16, 16, 5], "tanh", 0.1),
    ("pendulum_actor", [3, 64, 64, 1], "tanh", 2.0),
    ("tiny", [3, 4, 2], "identity", 1.0),
]


def _draw_smooth_point(net, rng, dim, margin=1e-3, tries=64):
    """Random input whose hidden pre-activations all clear the ReLU kink by
    ``margin`` - central differences are only meaningful off the kinks."""
    for _ in range(tries):
        x = rng.uniform(-1, 1, dim)
        h = x
        clear = True
        for i in range(len(net.weights) - 1):
            z = net.weights[i] @ h + net.biases[i]
            if np.min(np.abs(z)) < margin:
                clear = False
                break
            h = z * (z > 0.0)
        if clear:
            return x
    raise AssertionError("could not find a kink-free probe point")


def test_criterion_02_gradient_checks():
    ok = False
    worst = 0.0
    t0 = time.time()
    try:
        h = 1e-5
        rng = np.random.default_rng(0)
        for name, shape, act, scale in SHAPES:
            net = init_mlp(shape, np.random.default_rng(hash(name) % 2 ** 31),
                           output_activation=act, output_scale=scale)
            base = flatten_params(net)
            elementwise = base.size <= 600
            for _ in range(32):
                x = _draw_smooth_point(net, rng, shape[0])
                u = rng.uniform(-1, 1, shape[-1])
                _, cache = mlp_forward(net, x)
                gp = flatten_grads(mlp_grad_params(net, cache, u))
                gx = mlp_grad_input(net, cache, u)

                def f_params(theta):
                    set_flat_params(net, theta)
                    y, _ = mlp_forward(net, x)
                    set_flat_params(net, base)
                    return float(u @ y)

                if elementwise:
                    fd = np.empty(base.size)
                    for i in range(base.size):
                        tp, tm = base.copy(), base.copy()
                        tp[i] += h
                        tm[i] -= h
                        fd[i] = (f_params(tp) - f_params(tm)) / (2 * h)
                    err = np.max(np.abs(fd - gp)) / max(np.max(np.abs(fd)), 1e-12)
                else:
                    errs = []
                    for _ in range(8):
                        d = rng.standard_normal(base.size)
                        d /= np.linalg.norm(d)
                        fd_d = (f_params(base + h * d) - f_params(base - h * d)) / (2 * h)
                        errs.append(abs(fd_d - float(d @ gp)) / max(abs(fd_d), 1e-12))
                    err = max(errs)
                worst = max(worst, err)
                assert err < 1e-4, (name, "params", err)

                def f_input(xv):
                    y, _ = mlp_forward(net, xv)
                    return float(u @ y)

                fdx = np.empty(shape[0])
                for i in range(shape[0]):
                    xp, xm = x.copy(), x.copy()
                    xp[i] += h
                    xm[i] -= h
                    fdx[i] = (f_input(xp) - f_input(xm)) / (2 * h)
                err = np.max(np.abs(fdx - gx)) / max(np.max(np.abs(fdx)), 1e-12)
                worst = max(worst, err)
                assert err < 1e-4, (name, "input", err)
        ok = True
    finally:
        elapsed = time.time() - t0
        report(2, ok, f"both passes, {len(SHAPES)} shapes x 32 points, worst rel "
                      f"{worst:.2e}, {elapsed:.1f}s")
    assert elapsed < 10.0, f"gradient checks took {elapsed:.1f}s (budget 10s)"


def test_criterion_03_deterministic_gradient_vs_objective_fd():
    ok = False
    worst = 0.0
    t0 = time.time()
    try:
        env = ComplexPointEnv(force_deterministic=True)
        actor = init_mlp([5, 16, 16, 5], np.random.default_rng(21),
                         output_activation="tanh", output_scale=0.1)
        policy = MlpPolicy(actor)
        gamma, horizon, rollouts = 0.9, 40, 4
        grad = policy_gradient_deterministic(env, policy, gamma, rollouts, horizon,
                                             np.random.default_rng(33))
        start_rng = np.random.default_rng(33)
        starts = [env.reset(start_rng) for _ in range(rollouts)]
        base = flatten_params(actor)

        def objective(theta):
            set_flat_params(actor, theta)
            val = rollout_objective(env, policy, gamma, starts, horizon)
            set_flat_params(actor, base)
            return val

        dir_rng = np.random.default_rng(5)
        for _ in range(16):
            d = dir_rng.standard_normal(base.size)
            d /= np.linalg.norm(d)
            fd = fd_directional(objective, base, d, h=1e-5)
            err = abs(fd - float(d @ grad)) / max(abs(fd), 1e-10)
            worst = max(worst, err)
            assert err < 1e-2, err
        ok = True
    finally:
        elapsed = time.time() - t0
        report(3, ok, f"16 directions, worst rel {worst:.2e}, {elapsed:.1f}s")
    assert elapsed < 60.0


def test_criterion_04_general_estimator_reductions():
    ok = False
    t0 = time.time()
    try:
        env = ComplexPointEnv(force_deterministic=True)
        actor = init_mlp([5, 16, 16, 5], np.random.default_rng(3),
                         output_activation="tanh", output_scale=0.1)
        policy = MlpPolicy(actor)
        tr_det, tr_gen = [], []
        g_det = policy_gradient_deterministic(env, policy, 0.9, 3, 20,
                                              np.random.default_rng(42), trace=tr_det)
        g_gen = policy_gradient_general(env, policy, 0.9, 3, 20,
                                        np.random.default_rng(42), trace=tr_gen)
        assert np.array_equal(g_det, g_gen)
        assert len(tr_det) == len(tr_gen) > 0
        for (k1, t1, d1, u1), (k2, t2, d2, u2) in zip(tr_det, tr_gen):
            assert (k1, t1) == (k2, t2) and d1 == d2 and np.array_equal(u1, u2)

        env0 = QuadraticConvexEnv(mixing=0.0)
        lin = LinearPolicy(np.array([[0.1, -0.05, 0.02], [0.0, 0.08, -0.1]]))
        tr_sto, tr_gen0 = [], []
        g_sto = policy_gradient_stochastic(env0, lin, 0.9, 3, 8, np.random.default_rng(17),
                                           kernel_samples=4, v_rollouts=6, trace=tr_sto)
        g_gen0 = policy_gradient_general(env0, lin, 0.9, 3, 8, np.random.default_rng(17),
                                         kernel_samples=4, v_rollouts=6, trace=tr_gen0)
        assert np.array_equal(g_sto, g_gen0)
        assert len(tr_sto) == len(tr_gen0) > 0
        for (k1, t1, d1, u1), (k2, t2, d2, u2) in zip(tr_sto, tr_gen0):
            assert (k1, t1) == (k2, t2) and d1 == d2 and np.array_equal(u1, u2)
        ok = True
    finally:
        elapsed = time.time() - t0
        report(4, ok, f"f=1 and f=0 reductions exact term-for-term, {elapsed:.1f}s")
    assert elapsed < 60.0


def test_criterion_05_condition_checkers():
    ok = False
    rep = None
    t0 = time.time()
    try:
        env = ComplexPointEnv()
        rng = np.random.default_rng(1)
        actor = init_mlp([5, 64, 64, 5], rng, output_activation="tanh", output_scale=0.1)
        rep = convergence_report(env, MlpPolicy(actor), state_samples=32, chain_length=8,
                                 rng=rng)
        assert rep.gamma_threshold == pytest.approx(1.0 / (5 * 1.0))
        assert rep.f_max == 1.0
        assert not rep.cond_a1
        assert rep.cond_a2
        assert rep.cond_a2_worst_radius <= 1.0 + 1e-9
        ok = True
    finally:
        elapsed = time.time() - t0
        radius = rep.cond_a2_worst_radius if rep is not None else float("nan")
        report(5, ok, f"threshold 0.2, A.1 false (f_max 1), A.2 true "
                      f"(worst radius {radius:.3g}), {elapsed:.1f}s")
    assert elapsed < 10.0


def test_criterion_06_convex_value_lower_bound():
    ok = False
    gap, se = float("nan"), float("nan")
    t0 = time.time()
    try:
        env = QuadraticConvexEnv(mixing=0.5)
        policy = LinearPolicy(np.array([[0.05, -0.1, 0.0], [0.1, 0.0, -0.05]]))
        gamma, episodes, horizon = 0.9, 10_000, 40
        r_true = mc_episode_returns(env, policy, gamma, episodes, horizon,
                                    np.random.default_rng(30), transition="true")
        r_aug = mc_episode_returns(env, policy, gamma, episodes, horizon,
                                   np.random.default_rng(31), transition="augmented")
        se = float(np.sqrt(r_true.var(ddof=1) / episodes + r_aug.var(ddof=1) / episodes))
        gap = float(r_true.mean() - r_aug.mean())
        assert gap >= -3.0 * se, (gap, se)
        ok = True
    finally:
        elapsed = time.time() - t0
        report(6, ok, f"J - J* = {gap:+.4f} (combined se {se:.4f}) over 1e4 episodes, "
                      f"{elapsed:.0f}s")
    assert elapsed < 120.0


def test_criterion_07_mode_identity():
    ok = False
    t0 = time.time()
    try:
        steps, warmup = 1000, 200
        cfg_ddpg = GdpgConfig(mode="ddpg", total_steps=steps, warmup_steps=warmup)
        cfg_gdpg = GdpgConfig(mode="gdpg", alpha=1.0, total_steps=steps,
                              warmup_steps=warmup, aux_updates=False)
        _, st_a = train(ComplexPointEnv(), cfg_ddpg, seed=7)
        _, st_b = train(ComplexPointEnv(), cfg_gdpg, seed=7)
        assert np.array_equal(st_a.actor.flat, st_b.actor.flat)
        assert np.array_equal(st_a.target_actor.flat, st_b.target_actor.flat)
        ok = True
    finally:
        elapsed = time.time() - t0
        report(7, ok, f"ddpg == gdpg(alpha=1, aux off) bit-identical actors after "
                      f"{steps} steps, {elapsed:.0f}s")
    assert elapsed < 60.0


def test_criterion_09_transition_loss_floor():
    ok = False
    loss = float("nan")
    t0 = time.time()
    try:
        env = ComplexPointEnv()
        state = init_gdpg_state(env, GdpgConfig(), np.random.default_rng(21))
        rng = np.random.default_rng(22)
        n = 4096

        def sample_transitions(count):
            s = np.empty((count, 5))
            a = np.empty((count, 5))
            s2 = np.empty((count, 5))
            cur = env.reset(rng)
            for i in range(count):
                act = rng.uniform(-1e-4, 1e-4, 5)
                nxt, _, done = env.step(cur, act, rng)
                s[i], a[i], s2[i] = cur, act, nxt
                cur = env.reset(rng) if done else nxt
            return s, a, s2

        s, a, s2 = sample_transitions(n)
        batch_rng = np.random.default_rng(23)
        for _ in range(1500):
            idx = batch_rng.integers(0, n, 128)
            transition_update(state, (s[idx], a[idx], None, s2[idx], None))
        hs, ha, hs2 = sample_transitions(2048)
        from gdpg_lab.agent import state_action_input
        from gdpg_lab.nets import mlp_forward_batch
        pred, _ = mlp_forward_batch(state.transition, state_action_input(state, hs, ha))
        loss = float(np.mean(np.sum((pred - hs2) ** 2, axis=1)))
        floor = 5.0 / 3.0
        assert abs(loss - floor) / floor < 0.10, loss
        ok = True
    finally:
        elapsed = time.time() - t0
        report(9, ok, f"held-out transition loss {loss:.4f} vs floor {5 / 3:.4f} "
                      f"(within 10%), {elapsed:.0f}s")
    assert elapsed < 300.0


def test_criterion_10_byte_identical_runs(tmp_path):
    ok = False
    t0 = time.time()
    try:
        def cfg(out):
            return ExperimentConfig(env_id="complex_point", seeds=(0, 1),
                                    out_dir=str(out), workers=1,
                                    gdpg=GdpgConfig(total_steps=2000, warmup_steps=500))

        r1 = run(cfg(tmp_path / "a"))
        r2 = run(cfg(tmp_path / "b"))
        for seed in (0, 1):
            a = open(r1.seed_files[seed], "rb").read()
            b = open(r2.seed_files[seed], "rb").read()
            assert a == b, f"seed {seed} differs"
        assert open(r1.summary_file, "rb").read() == open(r2.summary_file, "rb").read()
        ok = True
    finally:
        elapsed = time.time() - t0
        report(10, ok, f"repeated runs byte-identical (2 seeds, 2000 steps), {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_08_alpha_ablation(tmp_path):
    ok = False
    detail, worst_clause, confidence = "sweep failed", False, float("nan")
    t0 = time.time()
    try:
        config = ExperimentConfig(env_id="complex_point", seeds=SWEEP_SEEDS,
                                  out_dir=str(tmp_path), workers=2,
                                  gdpg=GdpgConfig(mode="gdpg", total_steps=SWEEP_STEPS))
        sweep = sweep_alpha(config, SWEEP_ALPHAS)
        finals = {alpha: np.array([sweep.runs[alpha].final_rolling100[s]
                                   for s in SWEEP_SEEDS])
                  for alpha in SWEEP_ALPHAS}
        means = {alpha: float(v.mean()) for alpha, v in finals.items()}
        detail = " ".join(f"a={a:g}:{means[a]:.1f}" for a in SWEEP_ALPHAS)

        others = [means[a] for a in SWEEP_ALPHAS if a != 2.0]
        worst_clause = means[2.0] < min(others)

        # one-sided bootstrap: P(mean of alpha=0.5 finals >= mean of alpha=1 finals)
        boot_rng = np.random.default_rng(99)
        n = len(SWEEP_SEEDS)
        wins = 0
        reps = 10_000
        for _ in range(reps):
            m05 = finals[0.5][boot_rng.integers(0, n, n)].mean()
            m10 = finals[1.0][boot_rng.integers(0, n, n)].mean()
            wins += m05 >= m10
        confidence = wins / reps

        assert worst_clause, f"alpha=2 not strictly worst: {means}"
        assert confidence >= 0.70, f"alpha=0.5 >= alpha=1 at confidence {confidence:.2f}"
        ok = True
    finally:
        elapsed = time.time() - t0
        report(8, ok, f"{detail}; alpha=2 worst={worst_clause}, "
                      f"P(0.5 >= 1)={confidence:.2f}, {elapsed / 60:.1f} min")
