"""First-order update rules fed by (estimated or surrogate) gradients.

Note that Adam rescales its input per coordinate. Composed with the guided
estimator, whose expectation is already a PSD matrix times the gradient,
the product need not be PSD, so descent in expectation is no longer
guaranteed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

__all__ = ["OptimizerState", "sgd", "adam", "step"]


@dataclass(frozen=True, eq=False)
class OptimizerState:
    kind: str
    learning_rate: float
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def sgd(learning_rate: float) -> OptimizerState:
    if learning_rate <= 0:
        raise ValueError(f"learning rate must be positive, got {learning_rate}")
    return OptimizerState("sgd", float(learning_rate))


def adam(learning_rate: float, dim: int, beta1=0.9, beta2=0.999, eps=1e-8) -> OptimizerState:
    if learning_rate <= 0:
        raise ValueError(f"learning rate must be positive, got {learning_rate}")
    return OptimizerState("adam", float(learning_rate), np.zeros(dim), np.zeros(dim),
                          0, beta1, beta2, eps)


def step(state: OptimizerState, x, g):
    """Apply one update; returns ``(new_state, new_x)``."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if x.shape != g.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs g {g.shape}")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient passed to optimizer")
    if state.kind == "sgd":
        return state, x - state.learning_rate * g
    if state.kind != "adam":
        raise ValueError(f"unknown optimizer kind {state.kind!r}")
    if state.m.shape != g.shape:
        raise ValueError(f"Adam state has shape {state.m.shape}, gradient {g.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    x_new = x - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, t=t), x_new
