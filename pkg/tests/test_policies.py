import numpy as np

from gdpg_lab.nets import init_mlp
from gdpg_lab.policies import ConstantPolicy, LinearPolicy, MlpPolicy
from oracles import fd_gradient


def test_constant_policy_surface():
    policy = ConstantPolicy(np.array([0.3, -0.7]))
    pa = policy.at(np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(pa.action, np.array([0.3, -0.7]))
    assert np.array_equal(pa.jac_state(), np.zeros((2, 3)))
    u = np.array([2.0, 5.0])
    assert np.array_equal(pa.grad_params_dot(u), u)


def test_linear_policy_surface():
    k = np.array([[1.0, 0.5, 0.0], [-0.2, 0.0, 2.0]])
    policy = LinearPolicy(k)
    s = np.array([0.4, -1.0, 0.25])
    pa = policy.at(s)
    np.testing.assert_allclose(pa.action, k @ s, rtol=1e-15)
    assert np.array_equal(pa.jac_state(), k)
    u = np.array([1.0, -2.0])
    assert np.array_equal(pa.grad_params_dot(u), np.outer(u, s).ravel())


def test_linear_policy_grad_matches_fd():
    k0 = np.array([[0.1, -0.3], [0.7, 0.2]])
    policy = LinearPolicy(k0)
    s = np.array([0.9, -0.4])
    u = np.array([1.3, -0.6])

    def fn(flat):
        return float(u @ (flat.reshape(2, 2) @ s))

    fd = fd_gradient(fn, k0.ravel(), h=1e-6)
    np.testing.assert_allclose(policy.at(s).grad_params_dot(u), fd, rtol=1e-8)


def test_mlp_policy_state_jacobian_matches_fd():
    rng = np.random.default_rng(0)
    net = init_mlp([3, 8, 2], rng, output_activation="tanh", output_scale=0.5)
    policy = MlpPolicy(net)
    s = rng.uniform(-1, 1, 3)
    jac = policy.at(s).jac_state()
    for j in range(2):
        fd = fd_gradient(lambda sv, j=j: float(policy.act(sv)[j]), s, h=1e-6)
        np.testing.assert_allclose(jac[j], fd, rtol=1e-6, atol=1e-10)


def test_mlp_policy_flat_roundtrip():
    rng = np.random.default_rng(1)
    net = init_mlp([3, 8, 2], rng)
    policy = MlpPolicy(net)
    flat = policy.get_flat()
    policy.set_flat(flat * 0.5)
    np.testing.assert_allclose(policy.get_flat(), flat * 0.5, rtol=1e-15)
