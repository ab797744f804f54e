"""Small dense feed-forward networks with hand-written backpropagation.

Everything is float64. Dropout uses the inverted convention: surviving
activations are divided by the keep probability at training time, so
evaluation needs no rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeMismatch

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)
    activation: str = "relu"
    dropout: float = 0.0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {self.dropout}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeMismatch(f"weight {self.weight.shape} and bias {self.bias.shape} do not match")


@dataclass
class DenseNet:
    layers: list[Layer]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ShapeMismatch(f"layer widths do not chain: {a.weight.shape} -> {b.weight.shape}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def set_dropout(self, rate: float) -> None:
        for layer in self.layers[:-1]:
            layer.dropout = rate


@dataclass
class Cache:
    inputs: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)  # post-activation, pre-dropout
    masks: list[np.ndarray | None] = field(default_factory=list)


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def init_net(
    sizes: list[int],
    activations: list[str],
    dropout: float = 0.0,
    rng: np.random.Generator | int | None = None,
) -> DenseNet:
    """Build a net with ``len(sizes) - 1`` layers.

    ReLU layers get He-uniform weights (variance 2/fan_in), tanh and identity
    layers Xavier-uniform. Biases start at zero. ``dropout`` applies to every
    layer but the last.
    """
    if len(activations) != len(sizes) - 1:
        raise ConfigError("need one activation per layer")
    rng = np.random.default_rng(rng)
    layers = []
    for i, (fan_in, fan_out, act) in enumerate(zip(sizes, sizes[1:], activations)):
        if act == "relu":
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        rate = dropout if i < len(sizes) - 2 else 0.0
        layers.append(Layer(w, np.zeros(fan_out), act, rate))
    return DenseNet(layers)


def forward(
    net: DenseNet, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, Cache]:
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeMismatch(f"input of shape {x.shape} for a net expecting width {net.in_dim}")
    cache = Cache()
    a = x
    for layer in net.layers:
        cache.inputs.append(a)
        a = _activate(a @ layer.weight + layer.bias, layer.activation)
        cache.outputs.append(a)
        mask = None
        if train and layer.dropout > 0.0:
            if rng is None:
                raise ConfigError("training-mode dropout needs an rng")
            keep = 1.0 - layer.dropout
            mask = (rng.random(a.shape) < keep) / keep
            a = a * mask
        cache.masks.append(mask)
    return a, cache


def backward(
    net: DenseNet, cache: Cache, grad_out: np.ndarray, input_grad: bool = True
) -> tuple[list[np.ndarray], np.ndarray | None]:
    """Gradients of a scalar loss w.r.t. all parameters (``params()`` order).

    ``grad_out`` is the loss gradient w.r.t. the net output. The gradient
    w.r.t. the input is skipped when ``input_grad`` is false.
    """
    if grad_out.shape != cache.outputs[-1].shape:
        raise ShapeMismatch(f"output gradient {grad_out.shape} vs output {cache.outputs[-1].shape}")
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))  # type: ignore[list-item]
    g = grad_out
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        out = cache.outputs[i]
        if layer.activation == "relu":
            g = g * (out > 0)
        elif layer.activation == "tanh":
            g = g * (1.0 - out * out)
        grads[2 * i] = cache.inputs[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0 or input_grad:
            g = g @ layer.weight.T
    return grads, (g if input_grad else None)


def mae_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its gradient; the subgradient at 0 is 0."""
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    scratch: list[np.ndarray] = field(default_factory=list, repr=False)


def adam_init(params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                     lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ShapeMismatch("parameter, gradient and moment lists differ in length")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    if len(state.scratch) != len(params):
        state.scratch = [np.empty_like(p) for p in params]
    # in place with one scratch buffer per tensor: the subnet stack is millions of entries
    for p, g, m, v, tmp in zip(params, grads, state.m, state.v, state.scratch):
        m *= b1
        np.multiply(g, 1.0 - b1, out=tmp)
        m += tmp
        v *= b2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        v += tmp
        np.divide(v, c2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += state.eps
        np.divide(m, tmp, out=tmp)
        tmp *= state.lr / c1
        p -= tmp
    return state


def net_to_dict(net: DenseNet) -> list[dict]:
    return [
        {"activation": l.activation, "dropout": l.dropout, "weight": l.weight.tolist(), "bias": l.bias.tolist()}
        for l in net.layers
    ]


def net_from_dict(layers: list[dict]) -> DenseNet:
    return DenseNet([
        Layer(np.array(d["weight"], dtype=np.float64).reshape(len(d["weight"]), -1),
              np.array(d["bias"], dtype=np.float64), d["activation"], float(d["dropout"]))
        for d in layers
    ])
