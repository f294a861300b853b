"""Deterministic-policy-gradient laboratory.

Mixed deterministic/stochastic transition environments, numerical
gradient-existence analysis, exact-backprop policy-gradient estimators, and
GDPG/DDPG/MDPG training with a seeded CSV experiment harness.
"""

from .agent import (GdpgConfig, GdpgState, TrainingDiverged, actor_gradient, actor_update,
                    augmented_critic_update, critic_update, init_gdpg_state, load_checkpoint,
                    save_checkpoint, select_action, soft_update_targets, train,
                    transition_update)
from .envs import ENV_IDS, make_env
from .harness import ExperimentConfig, analyze, run, sweep_alpha
from .nets import AdamState, MlpParams, adam_step, init_mlp, mlp_forward, mlp_grad_input, \
    mlp_grad_params
from .linalg import spectral_radius
from .policies import ConstantPolicy, LinearPolicy, MlpPolicy
from .records import RunRecord
from .replay import ReplayBuffer
from .theory import (ConvergenceReport, JacobianChain, convergence_report, example1_grad_value,
                     example1_series_limit, mc_episode_returns, mc_return, mc_return_augmented,
                     policy_gradient_deterministic, policy_gradient_general,
                     policy_gradient_stochastic, series_grad_value, series_grad_value_general)

__version__ = "0.1.0"
