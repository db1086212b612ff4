"""Guiding-subspace bookkeeping: a FIFO of surrogate gradients and its basis."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .types import SubspaceBasis

__all__ = [
    "DegenerateSubspaceError",
    "SubspaceBuffer",
    "CorrelationVector",
    "basis_of",
    "correlation",
]

log = logging.getLogger(__name__)

# Relative residual below which a new direction counts as linearly dependent.
RANK_TOL = 1e-10


class DegenerateSubspaceError(ValueError):
    """The buffer holds no usable direction (empty or all zero)."""


class SubspaceBuffer:
    """Holds the ``capacity`` most recent surrogate gradients, oldest first."""

    def __init__(self, capacity: int, dim: Optional[int] = None):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.dim = dim
        self._entries: deque = deque(maxlen=self.capacity)

    def push(self, grad) -> "SubspaceBuffer":
        grad = np.array(grad, dtype=np.float64, copy=True).ravel()
        if self.dim is None:
            self.dim = grad.size
        elif grad.size != self.dim:
            raise ValueError(
                f"gradient has dimension {grad.size}, buffer expects {self.dim}"
            )
        if not np.any(grad):
            log.debug("zero surrogate gradient stored; it adds no basis column")
        self._entries.append(grad)
        return self

    @property
    def entries(self) -> list:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterable[np.ndarray]:
        return iter(self._entries)

    def clear(self) -> None:
        self._entries.clear()


def basis_of(buffer) -> SubspaceBasis:
    """Orthonormalize the buffer entries in insertion order.

    Gram-Schmidt with one reorthogonalization pass. A direction whose
    residual falls below ``RANK_TOL`` times the largest entry norm is
    dropped and the effective rank shrinks accordingly; the corresponding
    trailing columns of the result are zero.

    Raises
    ------
    DegenerateSubspaceError
        If the buffer is empty or every entry is zero.
    """
    entries = list(buffer)
    if not entries:
        raise DegenerateSubspaceError("empty subspace buffer")
    vectors = np.column_stack(entries).astype(np.float64, copy=False)
    n, m = vectors.shape
    scale = float(np.max(np.linalg.norm(vectors, axis=0)))
    if scale == 0.0:
        raise DegenerateSubspaceError("all surrogate gradients are zero")

    if m <= n:
        # Householder QR; |R_jj| / scale is exactly the relative residual that
        # Gram-Schmidt would test, so full rank here means nothing is dropped.
        q, r = np.linalg.qr(vectors / scale)
        if np.all(np.abs(np.diag(r)) > RANK_TOL):
            return SubspaceBasis(q, m)

    q = np.zeros((n, m))
    rank = 0
    for j in range(m):
        v = vectors[:, j] / scale
        for _ in range(2):
            if rank:
                v = v - q[:, :rank] @ (q[:, :rank].T @ v)
        norm = np.linalg.norm(v)
        if norm <= RANK_TOL:
            continue
        q[:, rank] = v / norm
        rank += 1
    return SubspaceBasis(q, rank)


@dataclass(frozen=True, eq=False)
class CorrelationVector:
    rho: np.ndarray
    norm: float


def correlation(basis: SubspaceBasis, grad) -> CorrelationVector:
    """Uncentered correlations between ``grad`` and each basis column.

    ``rho_i = grad . U_i / |grad|``; a zero gradient yields ``rho = 0``.
    """
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if grad.size != basis.dim:
        raise ValueError(
            f"gradient has dimension {grad.size}, basis expects {basis.dim}"
        )
    gnorm = np.linalg.norm(grad)
    if gnorm == 0.0:
        rho = np.zeros(basis.effective_rank)
    else:
        rho = basis.active.T @ (grad / gnorm)
    return CorrelationVector(rho, float(np.linalg.norm(rho)))
