"""Fully connected networks with hand-written backpropagation (float64)."""
from __future__ import annotations

import numpy as np


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    if name == "tanh01":
        return 0.5 * (np.tanh(z) + 1.0)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(float)
    if name == "tanh":
        return 1.0 - out * out
    if name == "tanh01":
        t = 2.0 * out - 1.0
        return 0.5 * (1.0 - t * t)
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


class DenseNet:
    """Stack of affine layers; ``weights[k]`` has shape (fan_in, fan_out)."""

    def __init__(self, sizes, hidden_act="relu", out_act="linear", rng=None, zero=False):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        self.sizes = sizes
        self.acts = [hidden_act] * (len(sizes) - 2) + [out_act]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng if rng is not None else np.random.default_rng(0)
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if zero:
                self.weights.append(np.zeros((fan_in, fan_out)))
                self.biases.append(np.zeros(fan_out))
            else:
                lim = 1.0 / np.sqrt(fan_in)
                self.weights.append(rng.uniform(-lim, lim, (fan_in, fan_out)))
                self.biases.append(rng.uniform(-lim, lim, fan_out))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params) -> None:
        params = list(params)
        for k in range(len(self.weights)):
            w, b = params[2 * k], params[2 * k + 1]
            if w.shape != self.weights[k].shape or b.shape != self.biases[k].shape:
                raise ValueError("parameter shape mismatch")
            self.weights[k] = np.array(w, dtype=float)
            self.biases[k] = np.array(b, dtype=float)

    def copy(self) -> "DenseNet":
        net = DenseNet.__new__(DenseNet)
        net.sizes = list(self.sizes)
        net.acts = list(self.acts)
        net.weights = [w.copy() for w in self.weights]
        net.biases = [b.copy() for b in self.biases]
        return net

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"input width {x.shape[-1]} != {self.in_dim}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = self._check(x)
        for w, b, a in zip(self.weights, self.biases, self.acts):
            h = _act(a, h @ w + b)
        return h

    def forward_cache(self, x: np.ndarray):
        h = np.atleast_2d(self._check(x))
        cache = [h]
        for w, b, a in zip(self.weights, self.biases, self.acts):
            z = h @ w + b
            h = _act(a, z)
            cache.append((z, h))
        return h, cache

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of sum(grad_out * output) w.r.t. parameters and input.

        Returns (param_grads ordered like ``params()``, grad_input).
        """
        g = np.atleast_2d(grad_out)
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            z, out = cache[k + 1]
            h_in = cache[0] if k == 0 else cache[k][1]
            g = g * _act_grad(self.acts[k], z, out)
            grads[2 * k] = h_in.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return grads, g
