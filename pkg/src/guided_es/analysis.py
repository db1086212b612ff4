"""Closed-form error analysis of the guided estimator and its Monte Carlo check.

All closed forms assume a single antithetic pair and an objective that is
exactly quadratic around ``x``. ``rho_sq`` is the squared norm of the
uncentered correlation between the true gradient and the guiding subspace.

The hyperparameter objective, written in ``theta = (alpha*beta,
(1-alpha)*beta)``, is ``theta' A theta - 2 b' theta + 1``; its stationarity
condition is ``A theta = b``. ``A`` is indefinite when the correlation is
small (and at ``rho=1`` unless ``k=n``), so the minimizer over ``theta >= 0``
is found by evaluating every KKT candidate rather than by a convex solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .sampler import StreamKey, as_key, sample_perturbations
from .types import ErrorProfile, SearchConfig, SubspaceBasis, validate_config

__all__ = [
    "QuadraticForm",
    "normalized_bias",
    "normalized_variance",
    "error_objective",
    "hyperparameter_system",
    "theta_objective",
    "to_theta",
    "from_theta",
    "optimal_hyperparameters",
    "regime_boundaries",
    "error_surface",
    "monte_carlo_error_profile",
    "SgdEquivalence",
    "sgd_equivalence_check",
    "MIN_MC_SAMPLES",
]

MIN_MC_SAMPLES = 1000


def _check(alpha, beta, k, n, rho_sq):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if beta < 0.0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= rho_sq <= 1.0:
        raise ValueError(f"rho_sq must lie in [0, 1], got {rho_sq}")


def normalized_bias(alpha, beta, k, n, rho_sq) -> float:
    """``|E[g] - grad|^2 / |grad|^2``."""
    _check(alpha, beta, k, n, rho_sq)
    full = beta * alpha / n - 1.0
    sub = beta * (1.0 - alpha) / k
    return full ** 2 + (sub ** 2 + 2.0 * sub * full) * rho_sq


def normalized_variance(alpha, beta, k, n, rho_sq) -> float:
    """``tr Var(g) / |grad|^2``."""
    _check(alpha, beta, k, n, rho_sq)
    a, c = alpha / n, (1.0 - alpha) / k
    return beta ** 2 * (a * a + a) + beta ** 2 * (c * c + 2.0 * a * c + c) * rho_sq


def error_objective(alpha, beta, k, n, rho_sq) -> ErrorProfile:
    return ErrorProfile(
        normalized_bias(alpha, beta, k, n, rho_sq),
        normalized_variance(alpha, beta, k, n, rho_sq),
        rho_sq,
    )


def hyperparameter_system(k, n, rho):
    """Matrix ``A`` and vector ``b`` of the reparameterized objective."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    r2 = rho * rho
    off = 0.5 * (4.0 * r2 / (k * n) + r2 / k + 1.0 / n)
    A = np.array([[2.0 / n ** 2 + 1.0 / n, off],
                  [off, (2.0 / k ** 2 + 1.0 / k) * r2]])
    b = np.array([1.0 / n, r2 / k])
    return A, b


def theta_objective(A, b, theta) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return float(theta @ A @ theta - 2.0 * b @ theta + 1.0)


def to_theta(alpha, beta) -> np.ndarray:
    return np.array([alpha * beta, (1.0 - alpha) * beta])


def from_theta(theta):
    """Map ``theta >= 0`` back to ``(alpha, beta)``; the origin maps to ``(1, 0)``."""
    beta = float(theta[0] + theta[1])
    if beta == 0.0:
        return 1.0, 0.0
    return float(theta[0]) / beta, beta


def optimal_hyperparameters(k, n, rho):
    """Minimize the expected normalized squared error over ``alpha, beta``.

    Every face of the nonnegative orthant is tried: the origin, the two
    axes (each with its 1-D stationary point) and the interior stationary
    point. The feasible candidate with the smallest objective wins.

    Returns
    -------
    (alpha_star, beta_star)
    """
    A, b = hyperparameter_system(k, n, rho)
    if rho == 0.0:
        return 1.0, n / (n + 2.0)
    candidates = [np.zeros(2), np.array([b[0] / A[0, 0], 0.0])]
    if A[1, 1] > 0.0:
        candidates.append(np.array([0.0, b[1] / A[1, 1]]))
    det = A[0, 0] * A[1, 1] - A[0, 1] ** 2
    if det != 0.0:
        interior = np.array([A[1, 1] * b[0] - A[0, 1] * b[1],
                             A[0, 0] * b[1] - A[0, 1] * b[0]]) / det
        if np.all(interior >= 0.0):
            candidates.append(interior)
    best = min(candidates, key=lambda t: theta_objective(A, b, t))
    return from_theta(best)


def regime_boundaries(k, n):
    """Correlations bounding the regime where ``0 < alpha_star < 1``."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return math.sqrt(k / n), math.sqrt((k + 4.0) / (n + 4.0))


def error_surface(k, n, rho, alphas, betas):
    """Bias and variance on the ``alphas x betas`` grid (``ij`` indexing)."""
    aa, bb = np.meshgrid(np.asarray(alphas, float), np.asarray(betas, float),
                         indexing="ij")
    r2 = rho * rho
    a, c = aa / n, (1.0 - aa) / k
    full = bb * a - 1.0
    sub = bb * c
    bias = full ** 2 + (sub ** 2 + 2.0 * sub * full) * r2
    var = bb ** 2 * (a * a + a) + bb ** 2 * (c * c + 2.0 * a * c + c) * r2
    return aa, bb, bias, var


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``f(y) = 0.5 y' H y + c' y + const``.

    ``hessian`` may be a full matrix or a 1-D array holding a diagonal.
    Calls accept a single point or a batch of points as rows.
    """

    hessian: np.ndarray
    linear: np.ndarray
    const: float = 0.0

    def _hmul(self, y):
        if self.hessian.ndim == 1:
            return y * self.hessian
        return y @ self.hessian.T

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        return 0.5 * np.sum(y * self._hmul(y), axis=-1) + y @ self.linear + self.const

    def gradient(self, y):
        return self._hmul(np.asarray(y, dtype=np.float64)) + self.linear

    @classmethod
    def with_gradient_at(cls, hessian, x, grad) -> "QuadraticForm":
        """A quadratic whose gradient at ``x`` equals ``grad``."""
        hessian = np.asarray(hessian, dtype=np.float64)
        h = hessian * x if hessian.ndim == 1 else hessian @ x
        return cls(hessian, np.asarray(grad, dtype=np.float64) - h)


def _estimates(f, x, cfg, basis, rng, size):
    eps = sample_perturbations(cfg, basis, rng, size)
    diff = f(x + eps) - f(x - eps)
    return (cfg.beta / (2.0 * cfg.sigma ** 2)) * eps * diff[:, None]


def monte_carlo_error_profile(f: QuadraticForm, x, cfg: SearchConfig,
                              basis: Optional[SubspaceBasis], samples: int,
                              key: Union[StreamKey, int],
                              chunk: int = 20000) -> ErrorProfile:
    """Empirical normalized bias and total variance of single-pair estimates.

    Samples are drawn in chunks, chunk ``j`` from stream ``key.child(j)``,
    and reduced in chunk order. ``rho_sq`` is measured from ``basis``.
    """
    validate_config(cfg)
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples, got {samples}")
    key = as_key(key)
    x = np.asarray(x, dtype=np.float64)
    grad = f.gradient(x)
    n = cfg.param_dim
    total = np.zeros(n)
    sq = np.zeros(n)
    done = 0
    j = 0
    while done < samples:
        m = min(chunk, samples - done)
        g = _estimates(f, x, cfg, basis, key.child(j).generator(), m)
        total += g.sum(axis=0)
        sq += (g * g).sum(axis=0)
        done += m
        j += 1
    mean = total / samples
    var = (sq - samples * mean * mean) / (samples - 1)
    g2 = float(grad @ grad)
    if basis is not None and basis.effective_rank:
        proj = basis.active.T @ grad
        rho_sq = float(proj @ proj) / g2
    else:
        rho_sq = 0.0
    bias = float(np.sum((mean - grad) ** 2)) / g2
    return ErrorProfile(bias, float(np.sum(var)) / g2, min(rho_sq, 1.0))


@dataclass(frozen=True, eq=False)
class SgdEquivalence:
    lhs: float
    rhs: float
    lhs_samples: np.ndarray
    rhs_samples: np.ndarray


def _half_sq_norm(y):
    return 0.5 * np.sum(np.asarray(y) ** 2, axis=-1)


def sgd_equivalence_check(cfg: SearchConfig, basis: Optional[SubspaceBasis],
                          x, samples: int, key: Union[StreamKey, int]) -> SgdEquivalence:
    """Loss after one unit-rate step vs. half the squared estimator error.

    On ``f(y) = |y|^2 / 2`` the gradient is ``y`` itself, so
    ``f(x - g)`` and ``|grad f(x) - g|^2 / 2`` agree sample by sample.
    """
    validate_config(cfg)
    x = np.asarray(x, dtype=np.float64)
    g = _estimates(_half_sq_norm, x, cfg, basis, as_key(key).generator(), samples)
    lhs = _half_sq_norm(x - g)
    grad = x.copy()  # gradient of |y|^2 / 2
    rhs = 0.5 * np.sum((grad - g) ** 2, axis=-1)
    return SgdEquivalence(float(lhs.mean()), float(rhs.mean()), lhs, rhs)
