"""Deterministic multilayer feature map with exact reverse-mode gradients.

Rows are observations. Layer ``l`` computes
``Z_l = act_l(Z_{l-1} @ W_l.T + b_l)`` with ``W_l`` of shape
``(output_width, input_width)``. The last layer's width is the latent
dimension ``q`` handed to the Gaussian processes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError


class Activation(str, enum.Enum):
    TANH = "tanh"
    RELU = "relu"
    IDENTITY = "identity"

    def __call__(self, a):
        if self is Activation.TANH:
            return np.tanh(a)
        if self is Activation.RELU:
            return np.maximum(a, 0.0)
        return a

    def derivative(self, a, z):
        """Elementwise derivative given pre-activation ``a`` and output ``z``."""
        if self is Activation.TANH:
            return 1.0 - z * z
        if self is Activation.RELU:
            return (a > 0).astype(float)
        return np.ones_like(a)


@dataclass(frozen=True)
class LayerSpec:
    input_width: int
    output_width: int
    activation: Activation = Activation.TANH

    def __post_init__(self):
        if self.input_width < 1 or self.output_width < 1:
            raise ConfigError(f"layer widths must be >= 1, got {self.input_width}->{self.output_width}")
        object.__setattr__(self, "activation", Activation(self.activation))


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.TANH

    @property
    def spec(self):
        out_w, in_w = self.weight.shape
        return LayerSpec(in_w, out_w, self.activation)


@dataclass
class NetworkParams:
    layers: list[Layer] = field(default_factory=list)

    @property
    def input_dim(self):
        return self.layers[0].weight.shape[1]

    @property
    def latent_dim(self):
        return self.layers[-1].weight.shape[0]

    @property
    def specs(self):
        return [layer.spec for layer in self.layers]

    def copy(self):
        return NetworkParams([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def to_vector(self):
        """Flatten all weights then biases, layer by layer."""
        parts = []
        for layer in self.layers:
            parts.append(layer.weight.ravel())
            parts.append(layer.bias.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def from_vector(self, vec):
        """New parameters with this network's shapes, filled from ``vec``."""
        vec = np.asarray(vec, dtype=float)
        layers, pos = [], 0
        for layer in self.layers:
            nw, nb = layer.weight.size, layer.bias.size
            w = vec[pos:pos + nw].reshape(layer.weight.shape).copy()
            pos += nw
            b = vec[pos:pos + nb].copy()
            pos += nb
            layers.append(Layer(w, b, layer.activation))
        if pos != vec.size:
            raise ConfigError(f"parameter vector has {vec.size} entries, network needs {pos}")
        return NetworkParams(layers)


def check_chain(specs):
    if not specs:
        raise ConfigError("a network needs at least one layer")
    for k in range(1, len(specs)):
        if specs[k].input_width != specs[k - 1].output_width:
            raise ConfigError(
                f"layer {k} expects input width {specs[k].input_width} "
                f"but layer {k - 1} outputs {specs[k - 1].output_width}"
            )


def init_network(specs, seed) -> NetworkParams:
    """Gaussian weights scaled by ``1/sqrt(fan_in)``, zero biases."""
    specs = [s if isinstance(s, LayerSpec) else LayerSpec(*s) for s in specs]
    check_chain(specs)
    rng = np.random.default_rng(seed)
    layers = []
    for s in specs:
        w = rng.standard_normal((s.output_width, s.input_width)) / np.sqrt(s.input_width)
        layers.append(Layer(w, np.zeros(s.output_width), s.activation))
    return NetworkParams(layers)


def forward(params: NetworkParams, theta):
    """Apply the network to a batch.

    Returns
    -------
    psi : ndarray, shape (N, q)
    cache : list of (input, pre_activation, output) per layer
    """
    z = np.asarray(theta, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2:
        raise InputError(f"theta must be a 2-d batch, got shape {z.shape}")
    if z.shape[1] != params.input_dim:
        raise ConfigError(f"network expects {params.input_dim} inputs, got {z.shape[1]}")
    if not np.all(np.isfinite(z)):
        raise InputError("theta contains non-finite values")
    cache = []
    for layer in params.layers:
        a = z @ layer.weight.T + layer.bias
        out = layer.activation(a)
        cache.append((z, a, out))
        z = out
    return z, cache


def backward(params: NetworkParams, cache, grad_psi):
    """Backpropagate ``d loss / d psi`` through the network.

    Returns
    -------
    grads : list of (dW, db), one pair per layer
    grad_theta : ndarray, shape (N, d)
    """
    if len(cache) != len(params.layers):
        raise RuntimeError("cache does not belong to these parameters")
    g = np.asarray(grad_psi, dtype=float)
    grads = []
    for layer, (z_in, a, out) in zip(reversed(params.layers), reversed(cache)):
        if g.shape != out.shape or z_in.shape[1] != layer.weight.shape[1]:
            raise RuntimeError("cache does not belong to these parameters")
        g = g * layer.activation.derivative(a, out)
        grads.append((g.T @ z_in, g.sum(axis=0)))
        g = g @ layer.weight
    grads.reverse()
    return grads, g


def grads_to_vector(grads):
    return np.concatenate([np.concatenate([dw.ravel(), db.ravel()]) for dw, db in grads])


def parse_layers(text, input_dim):
    """Parse ``"16:tanh, 2:identity"`` into chained :class:`LayerSpec` objects."""
    specs, width = [], input_dim
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        w, _, act = item.partition(":")
        try:
            out = int(w)
            activation = Activation(act.strip() or "tanh")
        except ValueError as exc:
            raise ConfigError(f"bad layer description {item!r}: {exc}") from None
        specs.append(LayerSpec(width, out, activation))
        width = out
    check_chain(specs)
    return specs
