"""Value types shared across the package.

All of these are immutable once built and safe to hand to worker threads.
The search covariance ``(alpha/n) I + ((1-alpha)/k) U U^T`` is only ever
carried around through its factors (``SearchConfig`` plus a
``SubspaceBasis``); nothing here builds an ``n x n`` matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "ConfigError",
    "SubspaceTooLargeError",
    "SearchConfig",
    "SubspaceBasis",
    "GradientEstimate",
    "ErrorProfile",
    "RunRecord",
    "validate_config",
]


class ConfigError(ValueError):
    """A search hyperparameter is outside its admissible range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class SubspaceTooLargeError(ConfigError):
    """Raised when the subspace dimension exceeds the parameter dimension."""


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters of the guided search distribution.

    Parameters
    ----------
    alpha : float
        Share of the perturbation variance spent on the full space; the rest
        goes to the guiding subspace. ``alpha=1`` is plain isotropic ES.
    beta : float
        Overall scale of the gradient estimate.
    sigma : float
        Perturbation scale; samples have covariance ``sigma**2 * Sigma``.
    pairs : int
        Number of antithetic pairs per estimate.
    subspace_dim : int
        Maximum dimension ``k`` of the guiding subspace.
    param_dim : int
        Parameter dimension ``n``.
    """

    alpha: float = 0.5
    beta: float = 2.0
    sigma: float = 0.1
    pairs: int = 1
    subspace_dim: int = 1
    param_dim: int = 1

    def with_alpha(self, alpha: float) -> "SearchConfig":
        return SearchConfig(alpha, self.beta, self.sigma, self.pairs,
                            self.subspace_dim, self.param_dim)


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def validate_config(cfg: SearchConfig) -> SearchConfig:
    """Return ``cfg`` unchanged, or raise ``ConfigError`` naming the bad field."""
    if not (math.isfinite(cfg.alpha) and 0.0 <= cfg.alpha <= 1.0):
        raise ConfigError("alpha", f"must lie in [0, 1], got {cfg.alpha!r}")
    if not (math.isfinite(cfg.beta) and cfg.beta >= 0.0):
        raise ConfigError("beta", f"must be nonnegative, got {cfg.beta!r}")
    if not (math.isfinite(cfg.sigma) and cfg.sigma > 0.0):
        raise ConfigError("sigma", f"must be positive, got {cfg.sigma!r}")
    for name in ("pairs", "subspace_dim", "param_dim"):
        value = getattr(cfg, name)
        if not _is_int(value) or value < 1:
            raise ConfigError(name, f"must be a positive integer, got {value!r}")
    if cfg.subspace_dim > cfg.param_dim:
        raise SubspaceTooLargeError(
            "subspace_dim",
            f"k={cfg.subspace_dim} exceeds parameter dimension n={cfg.param_dim}",
        )
    return cfg


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal basis of the guiding subspace.

    ``columns`` is ``n x m``; the first ``effective_rank`` columns are
    orthonormal and any trailing columns are zero (dropped, linearly
    dependent directions).
    """

    columns: np.ndarray
    effective_rank: int

    @property
    def active(self) -> np.ndarray:
        """The orthonormal ``n x effective_rank`` block."""
        return self.columns[:, : self.effective_rank]

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @classmethod
    def from_orthonormal(cls, u: np.ndarray) -> "SubspaceBasis":
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        return cls(u, u.shape[1])


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    direction: np.ndarray
    function_evals: int
    surrogate_grad_evals: int = 0


@dataclass(frozen=True)
class ErrorProfile:
    """Normalized squared bias and total variance of a gradient estimator."""

    bias: float
    variance: float
    rho_sq: float

    @property
    def total(self) -> float:
        return self.bias + self.variance


@dataclass(frozen=True)
class RunRecord:
    """One iteration of an optimization trace.

    ``correlation`` is NaN for algorithms that never see a surrogate gradient.
    Experiment-specific metrics (e.g. the learning-rate error of the unrolled
    problem) go in ``extras``.
    """

    iteration: int
    loss: float
    suboptimality: float
    correlation: float
    function_evals: int
    surrogate_grad_evals: int
    seed: int
    extras: dict = field(default_factory=dict)
    failed: bool = False
    failure: Optional[str] = None
