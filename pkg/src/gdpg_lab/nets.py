"""Minimal dense multilayer perceptron with explicit backprop, plus Adam.

Everything runs in float64 on plain numpy arrays. The batch functions are
the core implementation; the single-vector wrappers reshape through them so
both paths produce bit-identical arithmetic.

Parameters and gradients are backed by one contiguous flat vector with the
per-layer weight and bias arrays exposed as reshaped views (weights first,
then biases), so optimizer steps, target blending and route mixing are
single-array operations.

Gradient conventions: ``mlp_grad_params`` and ``mlp_grad_input`` return the
gradient of ``sum(upstream * output)``, i.e. upstream is the row vector that
left-multiplies the network Jacobian. For batched calls the result is summed
over the batch, so any 1/N weighting belongs in ``upstream``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("identity", "tanh")


def _pack_views(flat: np.ndarray, layer_sizes):
    """Weight and bias views into a flat buffer, weights first."""
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(flat[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in))
        pos += fan_out * fan_in
    for fan_out in layer_sizes[1:]:
        biases.append(flat[pos:pos + fan_out])
        pos += fan_out
    return weights, biases, pos


def flat_size(layer_sizes) -> int:
    return sum(o * i for i, o in zip(layer_sizes[:-1], layer_sizes[1:])) \
        + sum(layer_sizes[1:])


def weights_size(layer_sizes) -> int:
    """Length of the weight region at the front of the flat buffer."""
    return sum(o * i for i, o in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass
class MlpParams:
    """Weights and biases of a fully-connected net.

    weights[i] has shape (layer_sizes[i+1], layer_sizes[i]); biases[i] has
    shape (layer_sizes[i+1],). Hidden layers are ReLU; the output layer is
    either identity or a tanh squash scaled by ``output_scale`` (scalar or
    per-output array), used to keep actor outputs inside an action box.
    After construction the arrays are views into ``flat``.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    output_scale: float | np.ndarray = 1.0
    flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise ValueError("weights do not match layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if np.shape(w) != expect:
                raise ValueError(f"weights[{i}] has shape {np.shape(w)}, expected {expect}")
            if np.shape(b) != (self.layer_sizes[i + 1],):
                raise ValueError(f"biases[{i}] has shape {np.shape(b)}")
        self.flat = np.empty(flat_size(self.layer_sizes))
        views_w, views_b, _ = _pack_views(self.flat, self.layer_sizes)
        for dst, src in zip(views_w, self.weights):
            dst[...] = src
        for dst, src in zip(views_b, self.biases):
            dst[...] = src
        self.weights = views_w
        self.biases = views_b

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class MlpGrads:
    """Arrays shaped exactly like an MlpParams' weights and biases, backed by
    one flat vector when produced by this module."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    flat: np.ndarray | None = None


def grads_from_flat(flat: np.ndarray, layer_sizes) -> MlpGrads:
    views_w, views_b, used = _pack_views(flat, layer_sizes)
    if used != flat.size:
        raise ValueError("flat vector does not match the layer sizes")
    return MlpGrads(views_w, views_b, flat)


@dataclass
class MlpCache:
    """Forward-pass intermediates needed by both backward passes."""

    layer_inputs: list[np.ndarray]      # input to each layer, batch-major
    relu_masks: list[np.ndarray]        # hidden pre-activation > 0 masks
    out_tanh: np.ndarray | None         # tanh(z) of the output layer, if squashed


def init_mlp(layer_sizes, rng, output_activation="identity", output_scale=1.0) -> MlpParams:
    """Fresh net with weights and biases uniform in +-1/sqrt(fan_in)."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(
        layer_sizes=list(layer_sizes),
        weights=weights,
        biases=biases,
        output_activation=output_activation,
        output_scale=output_scale,
    )


def mlp_forward_batch(net: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    """Forward pass over a (batch, in_dim) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ValueError(f"input has shape {x.shape}, expected (batch, {net.in_dim})")
    layer_inputs = [x]
    relu_masks = []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        if i < last:
            mask = z > 0.0
            h = z * mask
            relu_masks.append(mask)
            layer_inputs.append(h)
        else:
            if net.output_activation == "tanh":
                t = np.tanh(z)
                y = t * net.output_scale
                return y, MlpCache(layer_inputs, relu_masks, t)
            return z, MlpCache(layer_inputs, relu_masks, None)
    raise AssertionError("unreachable")


def mlp_forward(net: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    """Forward pass for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("mlp_forward expects a 1-D input")
    y, cache = mlp_forward_batch(net, x[None, :])
    return y[0], cache


def _output_delta(net: MlpParams, cache: MlpCache, upstream: np.ndarray) -> np.ndarray:
    if upstream.shape[1] != net.out_dim:
        raise ValueError(f"upstream has shape {upstream.shape}, expected (batch, {net.out_dim})")
    if net.output_activation == "tanh":
        return upstream * (net.output_scale * (1.0 - cache.out_tanh ** 2))
    return upstream


def mlp_grad_params_batch(net: MlpParams, cache: MlpCache, upstream: np.ndarray) -> MlpGrads:
    """Gradient of sum_b upstream_b . y_b with respect to weights and biases."""
    upstream = np.asarray(upstream, dtype=np.float64)
    delta = _output_delta(net, cache, upstream)
    out = grads_from_flat(np.empty(flat_size(net.layer_sizes)), net.layer_sizes)
    for i in range(len(net.weights) - 1, -1, -1):
        np.matmul(delta.T, cache.layer_inputs[i], out=out.weights[i])
        np.sum(delta, axis=0, out=out.biases[i])
        if i > 0:
            delta = (delta @ net.weights[i]) * cache.relu_masks[i - 1]
    return out


def mlp_grad_params(net: MlpParams, cache: MlpCache, upstream: np.ndarray) -> MlpGrads:
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim != 1:
        raise ValueError("mlp_grad_params expects a 1-D upstream vector")
    return mlp_grad_params_batch(net, cache, upstream[None, :])


def mlp_grad_input_batch(net: MlpParams, cache: MlpCache, upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum_b upstream_b . y_b with respect to the input rows."""
    upstream = np.asarray(upstream, dtype=np.float64)
    delta = _output_delta(net, cache, upstream)
    for i in range(len(net.weights) - 1, 0, -1):
        delta = (delta @ net.weights[i]) * cache.relu_masks[i - 1]
    return delta @ net.weights[0]


def mlp_grad_input(net: MlpParams, cache: MlpCache, upstream: np.ndarray) -> np.ndarray:
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim != 1:
        raise ValueError("mlp_grad_input expects a 1-D upstream vector")
    return mlp_grad_input_batch(net, cache, upstream[None, :])[0]


def clone_params(net: MlpParams) -> MlpParams:
    return MlpParams(
        layer_sizes=list(net.layer_sizes),
        weights=[w.copy() for w in net.weights],
        biases=[b.copy() for b in net.biases],
        hidden_activation=net.hidden_activation,
        output_activation=net.output_activation,
        output_scale=np.copy(net.output_scale) if isinstance(net.output_scale, np.ndarray)
        else net.output_scale,
    )


def zero_grads(net: MlpParams) -> MlpGrads:
    return grads_from_flat(np.zeros(flat_size(net.layer_sizes)), net.layer_sizes)


def grads_combine(terms: list[tuple[float, MlpGrads]]) -> MlpGrads:
    """Elementwise linear combination sum_k c_k * g_k."""
    if not terms:
        raise ValueError("grads_combine needs at least one term")
    if all(g.flat is not None for _, g in terms):
        c0, g0 = terms[0]
        flat = c0 * g0.flat
        for c, g in terms[1:]:
            flat += c * g.flat
        layer_sizes = [g0.weights[0].shape[1]] + [w.shape[0] for w in g0.weights]
        return grads_from_flat(flat, layer_sizes)
    out_w = [terms[0][0] * w for w in terms[0][1].weights]
    out_b = [terms[0][0] * b for b in terms[0][1].biases]
    for c, g in terms[1:]:
        for ow, w in zip(out_w, g.weights):
            ow += c * w
        for ob, b in zip(out_b, g.biases):
            ob += c * b
    return MlpGrads(out_w, out_b)


def flatten_params(net: MlpParams) -> np.ndarray:
    return net.flat.copy()


def set_flat_params(net: MlpParams, flat: np.ndarray) -> None:
    if flat.size != net.flat.size:
        raise ValueError("flat vector does not match parameter count")
    net.flat[...] = flat


def flatten_grads(g: MlpGrads) -> np.ndarray:
    if g.flat is not None:
        return g.flat.copy()
    return np.concatenate([w.ravel() for w in g.weights] + [b.ravel() for b in g.biases])


def param_count(net: MlpParams) -> int:
    return net.flat.size


class NonFiniteGradient(RuntimeError):
    """Raised when an optimizer step receives NaN or infinite gradients."""


@dataclass
class AdamState:
    """Adam moments mirroring an MlpParams, plus step bookkeeping."""

    first_moment: MlpGrads
    second_moment: MlpGrads
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam(net: MlpParams, learning_rate: float) -> AdamState:
    return AdamState(first_moment=zero_grads(net), second_moment=zero_grads(net),
                     learning_rate=learning_rate)


def _grad_flat(grads: MlpGrads) -> np.ndarray:
    if grads.flat is not None:
        return grads.flat
    return np.concatenate([w.ravel() for w in grads.weights]
                          + [b.ravel() for b in grads.biases])


def adam_step(params: MlpParams, grads: MlpGrads, state: AdamState) -> tuple[MlpParams, AdamState]:
    """One Adam update, in place; returns the mutated params and state."""
    g = _grad_flat(grads)
    # A finite sum certifies every entry finite except on (absurd) overflow;
    # only then pay for the elementwise check.
    if not np.isfinite(g.sum()) and not np.all(np.isfinite(g)):
        raise NonFiniteGradient("non-finite gradient in adam_step")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    m = state.first_moment.flat
    v = state.second_moment.flat
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    denom = np.sqrt(v / bc2)
    denom += state.epsilon
    params.flat -= state.learning_rate * (m / bc1) / denom
    return params, state
