"""Torque-limited pendulum swing-up, the stock formulation.

State is observed as (cos phi, sin phi, phi_dot); the single action is a
torque in [-2, 2]. Dynamics are deterministic (f == 1):

    phi_dot' = clip(phi_dot + (3g/(2l) sin phi + 3/(m l^2) u) dt, -8, 8)
    phi'     = phi + phi_dot' dt

with g = 10, m = 1, l = 1, dt = 0.05, reward -(wrap(phi)^2 + 0.1 phi_dot^2
+ 0.001 u^2) and 200-step episodes. phi = 0 is upright. No analytic
jacobians; callers that need derivatives difference the dynamics.
"""

from __future__ import annotations

import numpy as np

from .base import MixedMdp

GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0


def _wrap_angle(x: float) -> float:
    return ((x + np.pi) % (2.0 * np.pi)) - np.pi


class PendulumEnv(MixedMdp):
    state_dim = 3
    action_dim = 1
    fully_deterministic = True
    max_episode_steps = 200

    def __init__(self):
        self.action_low = np.array([-MAX_TORQUE])
        self.action_high = np.array([MAX_TORQUE])

    def reset(self, rng):
        phi = rng.uniform(-np.pi, np.pi)
        phi_dot = rng.uniform(-1.0, 1.0)
        return np.array([np.cos(phi), np.sin(phi), phi_dot])

    def deterministic_map(self, s, a):
        phi = np.arctan2(s[1], s[0])
        phi_dot = s[2]
        u = float(np.clip(a[0], -MAX_TORQUE, MAX_TORQUE))
        accel = (3.0 * GRAVITY / (2.0 * LENGTH)) * np.sin(phi) + (3.0 / (MASS * LENGTH ** 2)) * u
        new_phi_dot = np.clip(phi_dot + accel * DT, -MAX_SPEED, MAX_SPEED)
        new_phi = phi + new_phi_dot * DT
        return np.array([np.cos(new_phi), np.sin(new_phi), new_phi_dot])

    def mixing_coeff(self, s, a):
        return 1.0

    def mixing_coeff_sup(self):
        return 1.0

    def reward(self, s, a):
        phi = _wrap_angle(float(np.arctan2(s[1], s[0])))
        u = float(np.clip(a[0], -MAX_TORQUE, MAX_TORQUE))
        return -(phi ** 2 + 0.1 * s[2] ** 2 + 0.001 * u ** 2)
