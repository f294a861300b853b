"""Deterministic policies with explicit derivative access.

Every policy exposes the same little surface the gradient estimators need:
the action, the state Jacobian dmu/ds, and the parameter-side contraction
d(upstream . mu(s))/dtheta as a flat vector. ``at(s)`` bundles these behind
one forward pass.
"""

from __future__ import annotations

import numpy as np

from .nets import MlpParams, flatten_grads, flatten_params, mlp_forward, mlp_grad_input, \
    mlp_grad_params, set_flat_params


class ConstantPolicy:
    """mu(s) = theta regardless of the state."""

    def __init__(self, theta):
        self.theta = np.asarray(theta, dtype=np.float64)

    @property
    def num_params(self) -> int:
        return self.theta.size

    def act(self, s):
        return self.theta

    def at(self, s):
        return _ConstantEval(self, s)

    def get_flat(self):
        return self.theta.copy()

    def set_flat(self, flat):
        self.theta = np.asarray(flat, dtype=np.float64).copy()


class _ConstantEval:
    def __init__(self, policy, s):
        self.action = policy.theta
        self._n = np.asarray(s).size
        self._m = policy.theta.size

    def jac_state(self):
        return np.zeros((self._m, self._n))

    def grad_params_dot(self, upstream):
        return np.asarray(upstream, dtype=np.float64).copy()


class LinearPolicy:
    """mu(s) = K s; parameters are the entries of K, row-major."""

    def __init__(self, k):
        self.k = np.asarray(k, dtype=np.float64)

    @property
    def num_params(self) -> int:
        return self.k.size

    def act(self, s):
        return self.k @ s

    def at(self, s):
        return _LinearEval(self, np.asarray(s, dtype=np.float64))

    def get_flat(self):
        return self.k.ravel().copy()

    def set_flat(self, flat):
        self.k = np.asarray(flat, dtype=np.float64).reshape(self.k.shape).copy()


class _LinearEval:
    def __init__(self, policy, s):
        self._k = policy.k
        self._s = s
        self.action = policy.k @ s

    def jac_state(self):
        return self._k.copy()

    def grad_params_dot(self, upstream):
        return np.outer(np.asarray(upstream, dtype=np.float64), self._s).ravel()


class MlpPolicy:
    """Actor backed by an MlpParams net."""

    def __init__(self, net: MlpParams):
        self.net = net

    @property
    def num_params(self) -> int:
        return flatten_params(self.net).size

    def act(self, s):
        y, _ = mlp_forward(self.net, s)
        return y

    def at(self, s):
        return _MlpEval(self, np.asarray(s, dtype=np.float64))

    def get_flat(self):
        return flatten_params(self.net)

    def set_flat(self, flat):
        set_flat_params(self.net, np.asarray(flat, dtype=np.float64))


class _MlpEval:
    def __init__(self, policy, s):
        self._net = policy.net
        self.action, self._cache = mlp_forward(policy.net, s)

    def jac_state(self):
        m = self._net.out_dim
        rows = []
        basis = np.zeros(m)
        for j in range(m):
            basis[:] = 0.0
            basis[j] = 1.0
            rows.append(mlp_grad_input(self._net, self._cache, basis))
        return np.stack(rows, axis=0)

    def grad_params_dot(self, upstream):
        return flatten_grads(mlp_grad_params(self._net, self._cache, upstream))
