"""Fully connected networks with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ContractViolation

RELU, LINEAR, ACTOR_HEAD = "relu", "linear", "actor_head"
ACTIVATIONS = (RELU, LINEAR, ACTOR_HEAD)


class NetKind(str, Enum):
    ACTOR = "ACTOR"
    CRITIC = "CRITIC"


@dataclass
class Layer:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.W.shape


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == RELU:
        return np.maximum(z, 0)
    if kind == LINEAR:
        return z
    if kind == ACTOR_HEAD:
        # accel, brake in [0, 1]; steering in [-1, 1]
        out = np.empty_like(z)
        out[:, :2] = _sigmoid(z[:, :2])
        out[:, 2:] = np.tanh(z[:, 2:])
        return out
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(z: np.ndarray, out: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise derivative of the activation, given pre- and post-activation."""
    if kind == RELU:
        return (z > 0).astype(z.dtype)
    if kind == LINEAR:
        return np.ones_like(z)
    g = np.empty_like(z)
    g[:, :2] = out[:, :2] * (1 - out[:, :2])
    g[:, 2:] = 1 - out[:, 2:] ** 2
    return g


class MLP:
    def __init__(self, layers: list[Layer], kind: NetKind):
        self.layers = layers
        self.kind = NetKind(kind)

    @classmethod
    def build(
        cls,
        sizes: list[int],
        kind: NetKind,
        rng: np.random.Generator,
        dtype=np.float32,
        final_scale: float | None = None,
    ) -> "MLP":
        kind = NetKind(kind)
        head = ACTOR_HEAD if kind is NetKind.ACTOR else LINEAR
        layers = []
        n = len(sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == n - 1
            bound = final_scale if (last and final_scale is not None) else 1.0 / np.sqrt(fan_in)
            W = rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype)
            b = rng.uniform(-bound, bound, size=fan_out).astype(dtype)
            layers.append(Layer(W, b, head if last else RELU))
        return cls(layers, kind)

    # -- introspection --------------------------------------------------

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.shape[0]

    @property
    def dtype(self):
        return self.layers[0].W.dtype

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def shapes(self) -> list[tuple[int, int]]:
        return [layer.shape for layer in self.layers]

    def copy(self) -> "MLP":
        return MLP([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers], self.kind)

    def astype(self, dtype) -> "MLP":
        return MLP([Layer(l.W.astype(dtype), l.b.astype(dtype), l.activation) for l in self.layers], self.kind)

    def load_from(self, other: "MLP") -> None:
        """Copy another network's values in place (shapes must agree)."""
        check_same_shapes(self, other)
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    # -- computation ----------------------------------------------------

    def forward(self, x: np.ndarray, keep: bool = False):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        cache = []
        for i, layer in enumerate(self.layers):
            if x.shape[1] != layer.W.shape[1]:
                raise ContractViolation(
                    f"{self.kind.value} layer {i}: expected input dim {layer.W.shape[1]}, got {x.shape[1]}"
                )
            z = x @ layer.W.T + layer.b
            out = activate(z, layer.activation)
            if keep:
                cache.append((x, z, out))
            x = out
        return (x, cache) if keep else x

    def backward(self, cache, grad_out: np.ndarray, grad_preact: np.ndarray | None = None):
        """Gradients of sum(grad_out * output) w.r.t. parameters and input.

        ``grad_preact`` is an extra gradient on the last layer's
        pre-activation (for penalties on it). Returns (grads aligned with
        ``params()``, gradient w.r.t. the input).
        """
        grads = [None] * (2 * len(self.layers))
        g = grad_out
        last = len(self.layers) - 1
        for i in range(last, -1, -1):
            layer = self.layers[i]
            x, z, out = cache[i]
            g = g * activation_grad(z, out, layer.activation)
            if i == last and grad_preact is not None:
                g = g + grad_preact
            grads[2 * i] = g.T @ x
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ layer.W
        return grads, g


def check_same_shapes(a: MLP, b: MLP) -> None:
    if a.shapes() != b.shapes():
        raise ContractViolation(f"network shapes differ: {a.shapes()} vs {b.shapes()}")


def soft_update(target: MLP, source: MLP, tau: float) -> None:
    """In place: target <- tau * source + (1 - tau) * target."""
    check_same_shapes(target, source)
    if tau == 1.0:
        target.load_from(source)
        return
    if tau == 0.0:
        return
    for t, s in zip(target.params(), source.params()):
        t *= 1.0 - tau
        t += tau * s


class SGD:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.params, self.lr = params, lr

    def step(self, grads: list[np.ndarray]) -> None:
        for p, g in zip(self.params, grads):
            p -= self.lr * g

    def rebind(self, params: list[np.ndarray]) -> None:
        self.params = params


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.lr = params, lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def rebind(self, params: list[np.ndarray]) -> None:
        """Point at a same-shaped parameter set, keeping the moment estimates."""
        self.params = params

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= (scale * m / (np.sqrt(v) + self.eps)).astype(p.dtype)


def make_optimizer(name: str, params: list[np.ndarray], lr: float):
    if name == "sgd":
        return SGD(params, lr)
    if name == "adam":
        return Adam(params, lr)
    raise ValueError(f"unknown optimizer {name!r}")
