"""Actor-critic training with a weighted model-free/model-based update.

Four online networks: actor mu, critic Q, augmented critic Q* and a
transition model T_hat. Q learns from replayed next states; Q* bootstraps
through T_hat's deterministic prediction instead, i.e. it values the
expectation-transition process. The actor ascends the batch mean of

    (1 - alpha) dmu/dtheta . dQ*/da  +  alpha dmu/dtheta . dQ/da

so alpha = 1 is DDPG, alpha = 0 the purely model-based objective, and
anything between a weighted compromise; alpha > 1 turns the Q* route
against itself. Modes: "gdpg" (any alpha), "ddpg" (alpha pinned to 1, no
auxiliary updates), "augmented_only" (alpha pinned to 0) and "mdpg" (actor
uses only the Q* route while both critics keep training).

One minibatch is drawn per environment step and shared by every update, so
runs that differ only in which updates fire consume identical randomness;
that is what makes ddpg and alpha = 1 runs bit-identical.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .envs.base import MixedMdp
from .nets import (AdamState, MlpGrads, MlpParams, NonFiniteGradient, adam_step, clone_params,
                   flatten_grads, grads_combine, init_adam, init_mlp, mlp_forward_batch,
                   mlp_grad_input_batch, mlp_grad_params_batch, weights_size)
from .noise import GaussianNoise, OrnsteinUhlenbeckNoise
from .records import RunRecord
from .replay import ReplayBuffer

MODES = ("gdpg", "ddpg", "mdpg", "augmented_only")


class TrainingDiverged(RuntimeError):
    """A loss or gradient became non-finite; carries the environment step."""

    def __init__(self, step: int, what: str):
        super().__init__(f"training halted at step {step}: {what}")
        self.step = step


@dataclass
class GdpgConfig:
    mode: str = "gdpg"
    alpha: float = 0.5
    gamma: float = 0.99
    tau: float = 0.01
    batch_size: int = 128
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    transition_lr: float = 1e-3
    transition_l2_coeff: float = 1e-4
    buffer_capacity: int = 1_000_000
    warmup_steps: int = 1000
    total_steps: int = 50_000
    hidden_sizes: tuple[int, ...] = (64, 64)
    noise_kind: str = "ou"          # "ou" or "gaussian"
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    gaussian_sigma: float = 0.1
    aux_updates: bool | None = None  # None: mode default (off only for ddpg)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; known: {', '.join(MODES)}")
        if self.mode == "ddpg":
            self.alpha = 1.0
        elif self.mode == "augmented_only":
            self.alpha = 0.0
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if self.noise_kind not in ("ou", "gaussian"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")

    @property
    def run_aux_updates(self) -> bool:
        if self.aux_updates is not None:
            return self.aux_updates
        return self.mode != "ddpg"

    @property
    def actor_route_weights(self) -> tuple[float, float]:
        """(weight on the Q* route, weight on the Q route)."""
        if self.mode == "mdpg":
            return 1.0, 0.0
        return 1.0 - self.alpha, self.alpha


@dataclass
class GdpgState:
    config: GdpgConfig
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    action_half: np.ndarray
    action_inv_half: np.ndarray
    actor: MlpParams
    critic: MlpParams
    critic_aug: MlpParams
    transition: MlpParams
    target_actor: MlpParams
    target_critic: MlpParams
    target_critic_aug: MlpParams
    adam_actor: AdamState
    adam_critic: AdamState
    adam_critic_aug: AdamState
    adam_transition: AdamState
    buffer: ReplayBuffer
    noise: object
    step_count: int = 0


def init_gdpg_state(env: MixedMdp, config: GdpgConfig, rng: np.random.Generator) -> GdpgState:
    """Build all four online nets (in a fixed order, so the draw sequence does
    not depend on the mode), exact target copies, buffer and noise."""
    n, m = env.state_dim, env.action_dim
    low, high = np.asarray(env.action_low), np.asarray(env.action_high)
    if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
        raise ValueError("training requires a bounded action box")
    if not np.allclose(low, -high):
        raise ValueError("training assumes an origin-symmetric action box")
    half = (high - low) / 2.0
    hid = list(config.hidden_sizes)
    actor = init_mlp([n] + hid + [m], rng, output_activation="tanh",
                     output_scale=half if half.size > 1 else float(half[0]))
    critic = init_mlp([n + m] + hid + [1], rng)
    critic_aug = init_mlp([n + m] + hid + [1], rng)
    transition = init_mlp([n + m] + hid + [n], rng)
    if config.noise_kind == "ou":
        noise = OrnsteinUhlenbeckNoise(m, theta=config.ou_theta, sigma=config.ou_sigma)
    else:
        noise = GaussianNoise(m, sigma=config.gaussian_sigma)
    return GdpgState(
        config=config, state_dim=n, action_dim=m,
        action_low=low, action_high=high, action_half=half,
        action_inv_half=1.0 / half,
        actor=actor, critic=critic, critic_aug=critic_aug, transition=transition,
        target_actor=clone_params(actor), target_critic=clone_params(critic),
        target_critic_aug=clone_params(critic_aug),
        adam_actor=init_adam(actor, config.actor_lr),
        adam_critic=init_adam(critic, config.critic_lr),
        adam_critic_aug=init_adam(critic_aug, config.critic_lr),
        adam_transition=init_adam(transition, config.transition_lr),
        buffer=ReplayBuffer(config.buffer_capacity, n, m),
        noise=noise,
    )


def select_action(state: GdpgState, s: np.ndarray, explore: bool,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Actor output, plus half-width-scaled exploration noise when asked,
    clipped to the action box. Noise lives in normalized action units (the
    [-1, 1]-actor convention), so one sigma means the same fraction of the
    box on every environment."""
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite state")
    a, _ = mlp_forward_batch(state.actor, np.asarray(s, dtype=np.float64)[None, :])
    a = a[0]
    if explore:
        if rng is None:
            raise ValueError("explore=True needs a generator")
        a = a + state.action_half * state.noise.sample(rng)
    return np.clip(a, state.action_low, state.action_high)


def _check_finite_loss(loss: float, what: str) -> None:
    if not np.isfinite(loss):
        raise NonFiniteGradient(f"non-finite {what}")


def state_action_input(state: GdpgState, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Critic/transition input rows: the action part is normalized by the box
    half-width so both feature groups share the [-1, 1] scale."""
    return np.concatenate((s, a * state.action_inv_half), axis=1)


def critic_update(state: GdpgState, batch) -> float:
    """Regress Q toward r + gamma (1 - done) Q'(s', mu'(s')); returns the
    pre-step mean squared error."""
    s, a, r, s2, d = batch
    cfg = state.config
    a2, _ = mlp_forward_batch(state.target_actor, s2)
    q2, _ = mlp_forward_batch(state.target_critic, state_action_input(state, s2, a2))
    y = r + cfg.gamma * (1.0 - d) * q2[:, 0]
    q, cache = mlp_forward_batch(state.critic, state_action_input(state, s, a))
    resid = q[:, 0] - y
    loss = float(np.mean(resid ** 2))
    _check_finite_loss(loss, "critic loss")
    upstream = (2.0 / resid.size) * resid
    grads = mlp_grad_params_batch(state.critic, cache, upstream[:, None])
    adam_step(state.critic, grads, state.adam_critic)
    return loss


def augmented_critic_update(state: GdpgState, batch, _prediction=None) -> float:
    """Like critic_update, but the bootstrap state is the transition model's
    prediction T_hat(s, a) rather than the replayed next state."""
    s, a, r, _, d = batch
    cfg = state.config
    x = state_action_input(state, s, a)
    if _prediction is None:
        s2_hat, _ = mlp_forward_batch(state.transition, x)
    else:
        s2_hat = _prediction
    a2, _ = mlp_forward_batch(state.target_actor, s2_hat)
    q2, _ = mlp_forward_batch(state.target_critic_aug,
                              state_action_input(state, s2_hat, a2))
    y = r + cfg.gamma * (1.0 - d) * q2[:, 0]
    q, cache = mlp_forward_batch(state.critic_aug, x)
    resid = q[:, 0] - y
    loss = float(np.mean(resid ** 2))
    _check_finite_loss(loss, "augmented critic loss")
    upstream = (2.0 / resid.size) * resid
    grads = mlp_grad_params_batch(state.critic_aug, cache, upstream[:, None])
    adam_step(state.critic_aug, grads, state.adam_critic_aug)
    return loss


def transition_update(state: GdpgState, batch, _forward=None) -> float:
    """One step on mean ||s' - T_hat(s, a)||^2 plus an L2 penalty on the
    weights; returns the unregularized loss."""
    s, a, _, s2, _ = batch
    cfg = state.config
    if _forward is None:
        pred, cache = mlp_forward_batch(state.transition, state_action_input(state, s, a))
    else:
        pred, cache = _forward
    err = pred - s2
    loss = float(np.mean(np.sum(err ** 2, axis=1)))
    _check_finite_loss(loss, "transition loss")
    upstream = (2.0 / err.shape[0]) * err
    grads = mlp_grad_params_batch(state.transition, cache, upstream)
    if cfg.transition_l2_coeff > 0.0:
        # The penalty applies to weights only; they sit at the front of flat.
        nw = weights_size(state.transition.layer_sizes)
        grads.flat[:nw] += (2.0 * cfg.transition_l2_coeff) * state.transition.flat[:nw]
    adam_step(state.transition, grads, state.adam_transition)
    return loss


def actor_gradient(state: GdpgState, batch, w_qstar: float, w_q: float) -> MlpGrads:
    """Ascent gradient of the weighted objective over the batch: the two
    critic routes are backpropagated separately and combined linearly, with
    exactly-zero weights skipped."""
    s = batch[0]
    a, cache_actor = mlp_forward_batch(state.actor, s)
    x = state_action_input(state, s, a)
    n = state.state_dim
    ones = np.ones((s.shape[0], 1))
    scale = state.action_inv_half / s.shape[0]  # chain through the normalization
    routes: list[tuple[float, MlpGrads]] = []
    if w_qstar != 0.0:
        _, c_aug = mlp_forward_batch(state.critic_aug, x)
        dq_da = mlp_grad_input_batch(state.critic_aug, c_aug, ones)[:, n:]
        routes.append((w_qstar,
                       mlp_grad_params_batch(state.actor, cache_actor, dq_da * scale)))
    if w_q != 0.0:
        _, c_q = mlp_forward_batch(state.critic, x)
        dq_da = mlp_grad_input_batch(state.critic, c_q, ones)[:, n:]
        routes.append((w_q,
                       mlp_grad_params_batch(state.actor, cache_actor, dq_da * scale)))
    if not routes:
        raise ValueError("both route weights are zero")
    return grads_combine(routes)


def actor_update(state: GdpgState, batch) -> float:
    """Ascent step on the mode's route weights; returns the applied gradient
    norm."""
    w_qstar, w_q = state.config.actor_route_weights
    ascent = actor_gradient(state, batch, w_qstar, w_q)
    descent = grads_combine([(-1.0, ascent)])
    adam_step(state.actor, descent, state.adam_actor)
    return float(np.linalg.norm(flatten_grads(ascent)))


def soft_update_targets(state: GdpgState) -> None:
    """Blend every target toward its online net: theta' <- tau theta +
    (1 - tau) theta'. tau = 1 copies exactly."""
    tau = state.config.tau
    pairs = [(state.actor, state.target_actor),
             (state.critic, state.target_critic),
             (state.critic_aug, state.target_critic_aug)]
    for online, target in pairs:
        target.flat *= 1.0 - tau
        target.flat += tau * online.flat


def train(env: MixedMdp, config: GdpgConfig, seed: int,
          state: GdpgState | None = None) -> tuple[list[RunRecord], GdpgState]:
    """Run the full loop: explore, store, and after the warmup do one update
    of every trained network per environment step (sharing one minibatch),
    then soft-update the targets. Returns per-episode records.

    Warmup actions are uniform over the box. Episodes end on termination or
    when the environment's step cap is hit; only terminations write a done
    flag into the buffer, so time-limit endings still bootstrap.
    """
    rng = np.random.default_rng(seed)
    if state is None:
        state = init_gdpg_state(env, config, rng)
    records: list[RunRecord] = []
    window: deque[float] = deque(maxlen=100)
    s = env.reset(rng)
    state.noise.reset()
    ep_return = 0.0
    ep_len = 0
    ep_idx = 0
    for step in range(1, config.total_steps + 1):
        if step <= config.warmup_steps:
            a = rng.uniform(state.action_low, state.action_high)
        else:
            a = select_action(state, s, explore=True, rng=rng)
        s2, r, done = env.step(s, a, rng)
        state.buffer.add(s, a, r, s2, done)
        ep_return += r
        ep_len += 1
        state.step_count = step
        if step > config.warmup_steps and state.buffer.size >= config.batch_size:
            batch = state.buffer.sample(config.batch_size, rng)
            try:
                critic_update(state, batch)
                if config.run_aux_updates:
                    # One transition forward serves both auxiliary updates:
                    # the augmented target must use the pre-update net anyway.
                    x = state_action_input(state, batch[0], batch[1])
                    t_fwd = mlp_forward_batch(state.transition, x)
                    augmented_critic_update(state, batch, _prediction=t_fwd[0])
                    transition_update(state, batch, _forward=t_fwd)
                actor_update(state, batch)
            except NonFiniteGradient as exc:
                halt = TrainingDiverged(step, str(exc))
                halt.records = records  # partial episode log for the harness
                raise halt from exc
            soft_update_targets(state)
        truncated = (env.max_episode_steps is not None
                     and ep_len >= env.max_episode_steps)
        if done or truncated:
            window.append(ep_return)
            records.append(RunRecord(seed=seed, episode=ep_idx, steps=step,
                                     episode_return=ep_return,
                                     rolling100=float(np.mean(window))))
            ep_idx += 1
            ep_return = 0.0
            ep_len = 0
            s = env.reset(rng)
            state.noise.reset()
        else:
            s = s2
    return records, state


# ---------------------------------------------------------------------------
# checkpoints: text dump of every network, exact float round trip


_NET_NAMES = ("actor", "critic", "critic_aug", "transition",
              "target_actor", "target_critic", "target_critic_aug")


def _format_floats(values: np.ndarray) -> str:
    return " ".join(float.hex(float(v)) for v in values.ravel())


def save_checkpoint(state: GdpgState, path) -> None:
    """Write all seven networks as a text dump: per net a header line with
    layer sizes and output activation, then one line per parameter array of
    hex-encoded float64 values (exact round trip)."""
    lines = ["gdpg-lab-checkpoint v1", f"step {state.step_count}"]
    for name in _NET_NAMES:
        net: MlpParams = getattr(state, name)
        scale = np.atleast_1d(np.asarray(net.output_scale, dtype=np.float64))
        lines.append(
            f"net {name} layers={','.join(str(x) for x in net.layer_sizes)} "
            f"output={net.output_activation} scale={_format_floats(scale).replace(' ', ',')}")
        for i, w in enumerate(net.weights):
            lines.append(f"w{i} {_format_floats(w)}")
        for i, b in enumerate(net.biases):
            lines.append(f"b{i} {_format_floats(b)}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[dict[str, MlpParams], int]:
    """Parse a checkpoint written by save_checkpoint."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != "gdpg-lab-checkpoint v1":
        raise ValueError("not a gdpg-lab checkpoint")
    step = int(lines[1].split()[1])
    nets: dict[str, MlpParams] = {}
    i = 2
    while i < len(lines):
        if not lines[i].startswith("net "):
            raise ValueError(f"expected a net header at line {i + 1}")
        _, name, layers_kv, output_kv, scale_kv = lines[i].split()
        sizes = [int(x) for x in layers_kv.split("=")[1].split(",")]
        output = output_kv.split("=")[1]
        scale_vals = np.array([float.fromhex(x) for x in scale_kv.split("=")[1].split(",")])
        scale = scale_vals if scale_vals.size > 1 else float(scale_vals[0])
        i += 1
        weights, biases = [], []
        for li in range(len(sizes) - 1):
            tag, rest = lines[i].split(" ", 1)
            assert tag == f"w{li}"
            weights.append(np.array([float.fromhex(x) for x in rest.split()])
                           .reshape(sizes[li + 1], sizes[li]))
            i += 1
        for li in range(len(sizes) - 1):
            tag, rest = lines[i].split(" ", 1)
            assert tag == f"b{li}"
            biases.append(np.array([float.fromhex(x) for x in rest.split()]))
            i += 1
        nets[name] = MlpParams(layer_sizes=sizes, weights=weights, biases=biases,
                               output_activation=output, output_scale=scale)
    return nets, step


def apply_checkpoint(state: GdpgState, nets: dict[str, MlpParams], step: int) -> None:
    for name in _NET_NAMES:
        loaded = nets[name]
        target: MlpParams = getattr(state, name)
        if loaded.layer_sizes != target.layer_sizes:
            raise ValueError(f"checkpoint net {name} has layer sizes {loaded.layer_sizes}, "
                             f"state expects {target.layer_sizes}")
        for dst, src in zip(target.weights, loaded.weights):
            dst[...] = src
        for dst, src in zip(target.biases, loaded.biases):
            dst[...] = src
    state.step_count = step
