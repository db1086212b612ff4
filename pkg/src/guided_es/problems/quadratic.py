"""Random linear-regression objective with a corrupted gradient oracle."""

from __future__ import annotations

import numpy as np
from scipy.linalg import blas, cho_solve

from ..sampler import StreamKey, as_key

__all__ = [
    "QuadraticProblem",
    "quadratic_loss",
    "quadratic_true_grad",
    "quadratic_surrogate_grad",
    "random_unit",
]


def random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


class QuadraticProblem:
    """``f(x) = |A x - b|^2 / (2M)`` with ``A`` (M x N) and ``b`` IID normal.

    The loss is evaluated as ``f* + |R (x - x*)|^2 / 2`` where ``R`` is the
    Cholesky factor of ``A'A / M``; this is algebraically identical, costs
    one ``N x N`` product instead of an ``M x N`` one, and keeps the
    suboptimality exactly nonnegative.

    The surrogate gradient is ``grad + |grad| (bias + noise)`` with ``bias``
    a unit vector fixed at construction and ``noise`` a fresh unit vector per
    call.
    """

    serial = False

    def __init__(self, A, b, bias_direction):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        self.A, self.b = A, b
        self.num_obs, self.dim = A.shape
        self.bias_direction = np.asarray(bias_direction, dtype=np.float64)
        hessian = A.T @ A / self.num_obs
        lower = np.linalg.cholesky(hessian)
        self._lower = np.asfortranarray(lower)
        self.x_opt = cho_solve((lower, True), A.T @ b / self.num_obs)
        resid = A @ self.x_opt - b
        self.f_star = float(resid @ resid) / (2 * self.num_obs)
        self._cache_x = None
        self._cache_rd = None
        self._cache_grad = None

    @classmethod
    def from_seed(cls, seed: int, num_params: int = 1000, num_obs: int = 2000):
        rng = StreamKey(int(seed), (0,)).generator()
        A = rng.standard_normal((num_obs, num_params))
        b = rng.standard_normal(num_obs)
        return cls(A, b, random_unit(rng, num_params))

    def _rd(self, x):
        # single-entry cache: loss, gradient and surrogate are often taken at one x
        if self._cache_x is not None and np.array_equal(self._cache_x, x):
            return self._cache_rd
        rd = self._chol_t_mul(x - self.x_opt)
        self._cache_x, self._cache_rd = np.array(x, copy=True), rd
        self._cache_grad = None
        return rd

    def _chol_t_mul(self, d):
        # R d with R = L' upper triangular; trmv reads half the matrix of a gemv
        return blas.dtrmv(self._lower, d, trans=1, lower=1)

    def __call__(self, x) -> float:
        return self.loss(x)

    def loss(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        rd = self._chol_t_mul(x - self.x_opt)
        return self.f_star + 0.5 * float(rd @ rd)

    def suboptimality(self, x) -> float:
        rd = self._rd(np.asarray(x, dtype=np.float64))
        return 0.5 * float(rd @ rd)

    def true_grad(self, x) -> np.ndarray:
        rd = self._rd(np.asarray(x, dtype=np.float64))
        if self._cache_grad is None:
            self._cache_grad = blas.dtrmv(self._lower, rd, lower=1)
        return self._cache_grad.copy()

    def surrogate_grad(self, x, key) -> np.ndarray:
        grad = self.true_grad(x)
        noise = random_unit(as_key(key).generator(), self.dim)
        return grad + (self.bias_direction + noise) * np.linalg.norm(grad)


def quadratic_loss(p: QuadraticProblem, x) -> float:
    return p.loss(x)


def quadratic_true_grad(p: QuadraticProblem, x) -> np.ndarray:
    return p.true_grad(x)


def quadratic_surrogate_grad(p: QuadraticProblem, x, key) -> np.ndarray:
    return p.surrogate_grad(x, key)
