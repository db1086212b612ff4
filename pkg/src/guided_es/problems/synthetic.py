"""Surrogate gradients from a learned scalar model of the objective.

A model ``M(x; theta)`` is fit online (Adam on a squared error) to
function values collected in a replay buffer; its input gradient is used
as the surrogate for ``f(x) = |x - x*|^2 / 2``.
"""

from __future__ import annotations

import numpy as np

from .. import optimizers
from ..sampler import StreamKey, as_key
from .mlp import Mlp, mlp_backward, mlp_forward

__all__ = [
    "ReplayBuffer",
    "SyntheticGradProblem",
    "synthetic_surrogate_grad",
    "synthetic_model_update",
    "REPLAY_CAPACITY",
    "BATCH_SIZE",
    "MODEL_LR",
]

REPLAY_CAPACITY = 8192
BATCH_SIZE = 512
MODEL_LR = 1e-4


class ReplayBuffer:
    """Ring buffer of ``(point, value)`` pairs; overwrites oldest first."""

    def __init__(self, capacity: int, dim: int):
        self.capacity = int(capacity)
        self.points = np.zeros((self.capacity, dim))
        self.values = np.zeros(self.capacity)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, points, values) -> None:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        for p, v in zip(points, values):
            self.points[self._next] = p
            self.values[self._next] = v
            self._next = (self._next + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)

    def ordered(self):
        """Contents oldest to newest."""
        if self._size < self.capacity:
            idx = np.arange(self._size)
        else:
            idx = (np.arange(self.capacity) + self._next) % self.capacity
        return self.points[idx], self.values[idx]

    def sample(self, rng: np.random.Generator, batch: int):
        idx = rng.integers(0, self._size, size=batch)
        return self.points[idx], self.values[idx]


class SyntheticGradProblem:
    serial = True  # evaluations feed the replay buffer through the harness

    def __init__(self, x_star, model: Mlp, capacity=REPLAY_CAPACITY,
                 batch_size=BATCH_SIZE, model_lr=MODEL_LR):
        self.x_star = np.asarray(x_star, dtype=np.float64)
        self.dim = self.x_star.size
        self.template = model
        self.theta = model.flat()
        self.model_opt = optimizers.adam(model_lr, self.theta.size)
        self.buffer = ReplayBuffer(capacity, self.dim)
        self.batch_size = batch_size
        self.f_star = 0.0

    @classmethod
    def from_seed(cls, seed: int, dim: int = 100, hidden=(64, 64), **kwargs):
        rng = StreamKey(int(seed), (0,)).generator()
        x_star = rng.uniform(-1.0, 1.0, size=dim)
        model = Mlp.init([dim, *hidden, 1], rng)
        return cls(x_star, model, **kwargs)

    @property
    def model(self) -> Mlp:
        return self.template.with_flat(self.theta)

    def __call__(self, x) -> float:
        return self.loss(x)

    def loss(self, x) -> float:
        d = np.asarray(x, dtype=np.float64) - self.x_star
        return 0.5 * float(d @ d)

    def true_grad(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) - self.x_star

    def surrogate_grad(self, x, key=None) -> np.ndarray:
        return synthetic_surrogate_grad(self, x)

    def record(self, points, values) -> None:
        self.buffer.add(points, values)

    def model_loss(self, points, values) -> float:
        pred = self.model_predict(points)
        return float(np.mean((pred - values) ** 2))

    def model_predict(self, points):
        return mlp_forward(self.model, points)[:, 0]


def synthetic_surrogate_grad(sp: SyntheticGradProblem, x) -> np.ndarray:
    """Input gradient of the scalar model at ``x``."""
    _, dx = mlp_backward(sp.model, np.asarray(x, dtype=np.float64), np.ones(1))
    return dx


def synthetic_model_update(sp: SyntheticGradProblem, key) -> SyntheticGradProblem:
    """One Adam step on the mean squared error over a replay batch.

    A no-op while the buffer is empty.
    """
    if len(sp.buffer) == 0:
        return sp
    points, values = sp.buffer.sample(as_key(key).generator(), sp.batch_size)
    model = sp.model
    resid = mlp_forward(model, points)[:, 0] - values
    grads, _ = mlp_backward(model, points, (2.0 / len(values)) * resid[:, None])
    sp.model_opt, sp.theta = optimizers.step(sp.model_opt, sp.theta, grads.flat())
    return sp
