"""Perturbation sampling from ``N(0, sigma^2 Sigma)`` via the low-rank factors.

``eps = sigma*sqrt(alpha/n) * z + sigma*sqrt((1-alpha)/k) * U z'`` with
``z ~ N(0, I_n)`` and ``z' ~ N(0, I_k)``. The full-space draw ``z`` is
always taken first from the generator, so isotropic (``alpha=1``) and
guided paths consume identical noise for the shared term.

Randomness comes from :class:`StreamKey`, a seed plus an integer path that
maps to an independent Philox (counter-based) stream. The estimator gives
each antithetic pair its own child key, which makes results independent of
evaluation scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .subspace import DegenerateSubspaceError
from .types import SearchConfig, SubspaceBasis

__all__ = [
    "StreamKey",
    "as_key",
    "PerturbationPair",
    "sample_perturbation",
    "sample_perturbations",
    "antithetic_pair",
    "subspace_rank",
    "covariance_trace",
]


@dataclass(frozen=True)
class StreamKey:
    """Names an independent random stream: ``(seed, path...)``."""

    seed: int
    path: tuple = ()

    def child(self, *index: int) -> "StreamKey":
        return StreamKey(self.seed, self.path + tuple(int(i) for i in index))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


def as_key(key: Union[StreamKey, int]) -> StreamKey:
    if isinstance(key, StreamKey):
        return key
    return StreamKey(int(key))


@dataclass(frozen=True, eq=False)
class PerturbationPair:
    positive: np.ndarray
    negative: np.ndarray


def subspace_rank(cfg: SearchConfig, basis: Optional[SubspaceBasis]) -> int:
    """Subspace dimension used in the covariance; 0 means isotropic only.

    During warm-up the basis may have fewer than ``cfg.subspace_dim``
    columns and its effective rank stands in for ``k``.
    """
    if cfg.alpha == 1.0:
        return 0
    rank = 0 if basis is None else basis.effective_rank
    if rank == 0:
        raise DegenerateSubspaceError(
            "alpha < 1 requires a nonempty guiding subspace; use alpha=1 instead"
        )
    if basis.dim != cfg.param_dim:
        raise ValueError(
            f"basis dimension {basis.dim} does not match n={cfg.param_dim}"
        )
    return rank


def covariance_trace(cfg: SearchConfig, basis: Optional[SubspaceBasis]) -> float:
    """Trace of ``Sigma`` computed from its factors (1 for orthonormal U)."""
    k = subspace_rank(cfg, basis)
    full = cfg.alpha / cfg.param_dim * cfg.param_dim
    if k == 0:
        return full
    return full + (1.0 - cfg.alpha) / k * float(np.sum(basis.active ** 2))


def sample_perturbation(cfg: SearchConfig, basis: Optional[SubspaceBasis],
                        rng: np.random.Generator) -> np.ndarray:
    """Draw one perturbation ``eps ~ N(0, sigma^2 Sigma)``."""
    n = cfg.param_dim
    k = subspace_rank(cfg, basis)
    eps = (cfg.sigma * np.sqrt(cfg.alpha / n)) * rng.standard_normal(n)
    if k:
        coef = rng.standard_normal(k)
        eps = eps + (cfg.sigma * np.sqrt((1.0 - cfg.alpha) / k)) * (basis.active @ coef)
    return eps


def sample_perturbations(cfg: SearchConfig, basis: Optional[SubspaceBasis],
                         rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` perturbations as rows of a ``(size, n)`` array.

    Vectorized counterpart of :func:`sample_perturbation` for Monte Carlo
    work; it consumes the generator in a different order, so rows do not
    coincide with repeated single draws.
    """
    n = cfg.param_dim
    k = subspace_rank(cfg, basis)
    eps = (cfg.sigma * np.sqrt(cfg.alpha / n)) * rng.standard_normal((size, n))
    if k:
        coef = rng.standard_normal((size, k))
        eps += (cfg.sigma * np.sqrt((1.0 - cfg.alpha) / k)) * (coef @ basis.active.T)
    return eps


def antithetic_pair(cfg: SearchConfig, basis: Optional[SubspaceBasis],
                    rng: np.random.Generator) -> PerturbationPair:
    eps = sample_perturbation(cfg, basis, rng)
    return PerturbationPair(eps, -eps)
