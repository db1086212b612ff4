"""Antithetic finite-difference gradient estimates (guided and vanilla ES)."""

from __future__ import annotations

import math
from concurrent.futures import Executor
from typing import Callable, Optional, Union

import numpy as np

from .sampler import StreamKey, as_key, sample_perturbation, subspace_rank
from .types import GradientEstimate, SearchConfig, SubspaceBasis, validate_config

__all__ = [
    "NonFiniteObjectiveError",
    "estimate_gradient",
    "vanilla_gradient",
    "expected_update",
]

Objective = Callable[[np.ndarray], float]


class NonFiniteObjectiveError(FloatingPointError):
    """The objective returned NaN or inf at a perturbed point."""

    def __init__(self, index: int, sign: str, value: float):
        super().__init__(f"objective is {value!r} at x {sign} eps[{index}]")
        self.index = index
        self.sign = sign
        self.value = value


def _pair_values(f: Objective, x: np.ndarray, eps: np.ndarray):
    return float(f(x + eps)), float(f(x - eps))


def estimate_gradient(f: Objective, x, cfg: SearchConfig,
                      basis: Optional[SubspaceBasis],
                      key: Union[StreamKey, int],
                      executor: Optional[Executor] = None) -> GradientEstimate:
    """Guided ES descent direction from ``cfg.pairs`` antithetic pairs.

    ``g = beta / (2 sigma^2 P) * sum_i eps_i (f(x + eps_i) - f(x - eps_i))``

    Pair ``i`` draws its perturbation from ``key.child(i)``. When an
    ``executor`` is given the ``2P`` evaluations are submitted to it, unless
    the objective carries a truthy ``serial`` attribute. Contributions are
    summed in pair order either way, so the result depends only on the key.

    Raises
    ------
    NonFiniteObjectiveError
        If any evaluation is not finite; ``index`` names the pair.
    """
    validate_config(cfg)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.param_dim,):
        raise ValueError(f"x has shape {x.shape}, expected ({cfg.param_dim},)")
    subspace_rank(cfg, basis)
    key = as_key(key)
    eps = [sample_perturbation(cfg, basis, key.child(i).generator())
           for i in range(cfg.pairs)]

    if executor is not None and not getattr(f, "serial", False):
        futures = [executor.submit(_pair_values, f, x, e) for e in eps]
        values = [fut.result() for fut in futures]
    else:
        values = [_pair_values(f, x, e) for e in eps]

    direction = np.zeros(cfg.param_dim)
    for i, (e, (fp, fm)) in enumerate(zip(eps, values)):
        if not math.isfinite(fp):
            raise NonFiniteObjectiveError(i, "+", fp)
        if not math.isfinite(fm):
            raise NonFiniteObjectiveError(i, "-", fm)
        direction += e * (fp - fm)
    direction *= cfg.beta / (2.0 * cfg.sigma ** 2 * cfg.pairs)
    return GradientEstimate(direction, function_evals=2 * cfg.pairs)


def vanilla_gradient(f: Objective, x, cfg: SearchConfig,
                     key: Union[StreamKey, int],
                     executor: Optional[Executor] = None) -> GradientEstimate:
    """Isotropic ES: the guided estimator with ``alpha=1`` and no subspace."""
    return estimate_gradient(f, x, cfg.with_alpha(1.0), None, key, executor)


def expected_update(cfg: SearchConfig, basis: Optional[SubspaceBasis], grad) -> np.ndarray:
    """``E[g] = beta * Sigma @ grad`` for a locally quadratic objective."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != (cfg.param_dim,):
        raise ValueError(f"grad has shape {grad.shape}, expected ({cfg.param_dim},)")
    k = subspace_rank(cfg, basis)
    out = (cfg.alpha / cfg.param_dim) * grad
    if k:
        u = basis.active
        out = out + ((1.0 - cfg.alpha) / k) * (u @ (u.T @ grad))
    return cfg.beta * out
