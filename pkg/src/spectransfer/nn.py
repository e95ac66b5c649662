"""Minimal dense-network building blocks (numpy, CPU, deterministic).

Everything trainable in this package (the generative model and the
classification harness) is built from these pieces so one seeded code
path controls initialization and optimization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Dense:
    W: np.ndarray
    b: np.ndarray

    @property
    def arrays(self) -> list[np.ndarray]:
        return [self.W, self.b]


def init_dense(rng: np.random.Generator, n_in: int, n_out: int) -> Dense:
    """Uniform fan-in init: W ~ U(+-1/sqrt(n_in)), zero biases."""
    bound = 1.0 / np.sqrt(n_in)
    return Dense(rng.uniform(-bound, bound, (n_in, n_out)), np.zeros(n_out))


def linear(layer: Dense, x: np.ndarray) -> np.ndarray:
    return x @ layer.W + layer.b


# activation name -> (f, f' as a function of the preactivation)
ACTIVATIONS = {
    "tanh": (np.tanh, lambda pre: 1.0 - np.tanh(pre) ** 2),
    "sin": (np.sin, np.cos),
    "relu": (
        lambda pre: np.maximum(pre, 0.0),
        lambda pre: (pre > 0).astype(float),
    ),
}


@dataclass
class StackCache:
    inputs: list[np.ndarray]  # layer inputs; inputs[0] is the stack input
    preacts: list[np.ndarray]


def stack_forward(
    layers: list[Dense], x: np.ndarray, activation: str = "tanh"
) -> tuple[np.ndarray, StackCache]:
    """Run x through activation(linear(...)) layers, caching for backprop."""
    act, _ = ACTIVATIONS[activation]
    inputs, preacts = [x], []
    for layer in layers:
        pre = linear(layer, x)
        preacts.append(pre)
        x = act(pre)
        inputs.append(x)
    return x, StackCache(inputs, preacts)


def stack_backward(
    layers: list[Dense],
    cache: StackCache,
    d_out: np.ndarray,
    activation: str = "tanh",
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Backpropagate through a stack.

    Returns the gradient w.r.t. the stack input and the per-layer
    [dW, db, dW, db, ...] list in layer order.
    """
    _, dact = ACTIVATIONS[activation]
    grads: list[np.ndarray] = []
    for i in range(len(layers) - 1, -1, -1):
        d_pre = d_out * dact(cache.preacts[i])
        grads.insert(0, d_pre.sum(axis=0))
        grads.insert(0, cache.inputs[i].T @ d_pre)
        d_out = d_pre @ layers[i].W.T
    return d_out, grads


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


class Adam:
    """Adaptive-moment gradient descent over a fixed list of arrays."""

    def __init__(
        self,
        params: list[np.ndarray],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
