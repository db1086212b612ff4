"""A small fully connected ReLU network with hand-written backprop.

Inputs are rows (``batch x features``); a 1-D input is treated as a batch
of one and the output is returned 1-D as well. Weights are stored
``(fan_out, fan_in)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

__all__ = ["Mlp", "MlpGrads", "mlp_forward", "mlp_backward", "softplus", "INIT_SCALE"]

# Weights start U(-s, s) with s = INIT_SCALE / sqrt(fan_in); biases start at 0.
INIT_SCALE = 1.0

OUTPUTS = ("identity", "softplus")


def softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(eq=False)
class Mlp:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    output: str = "identity"

    def __post_init__(self):
        if self.output not in OUTPUTS:
            raise ValueError(f"output must be one of {OUTPUTS}, got {self.output!r}")
        if len(self.weights) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[1]} does not chain")

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, output="identity"):
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            s = INIT_SCALE / np.sqrt(fan_in)
            weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, output)

    @classmethod
    def zeros(cls, sizes: Sequence[int], output="identity"):
        weights = [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
        return cls(weights, [np.zeros(o) for o in sizes[1:]], output)

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    def with_flat(self, theta) -> "Mlp":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.num_params:
            raise ValueError(f"expected {self.num_params} parameters, got {theta.size}")
        weights, biases, i = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(theta[i:i + w.size].reshape(w.shape))
            i += w.size
            biases.append(theta[i:i + b.size])
            i += b.size
        return Mlp(weights, biases, self.output)


@dataclass(eq=False)
class MlpGrads:
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)


def _as_batch(model, inputs):
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.sizes[0]:
        raise ValueError(f"input width {x.shape[1]} != model input {model.sizes[0]}")
    return x, single


def _forward(model, x):
    acts, pre = [x], []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    out = softplus(h) if model.output == "softplus" else h
    return out, acts, pre


def mlp_forward(model: Mlp, inputs) -> np.ndarray:
    x, single = _as_batch(model, inputs)
    out = _forward(model, x)[0]
    return out[0] if single else out


def mlp_backward(model: Mlp, inputs, output_grad):
    """Gradients of ``sum(output * output_grad)``.

    Returns
    -------
    grads : MlpGrads
        Parameter gradients summed over the batch.
    input_grad : ndarray
        Gradient with respect to ``inputs`` (same shape as ``inputs``).
    """
    x, single = _as_batch(model, inputs)
    out, acts, pre = _forward(model, x)
    dy = np.asarray(output_grad, dtype=np.float64).reshape(out.shape)
    if model.output == "softplus":
        dy = dy * _sigmoid(pre[-1])
    dws, dbs = [], []
    dz = dy
    for i in range(len(model.weights) - 1, -1, -1):
        dws.append(dz.T @ acts[i])
        dbs.append(dz.sum(axis=0))
        dh = dz @ model.weights[i]
        if i:
            dz = dh * (pre[i - 1] > 0.0)
    grads = MlpGrads(dws[::-1], dbs[::-1])
    return grads, (dh[0] if single else dh)
