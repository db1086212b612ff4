"""Meta-learning a gradient-descent step size through an unrolled inner loop.

An MLP maps the sorted Hessian eigenvalues (of ``A'A / M``) to a learning rate
``eta = softplus(MLP(eigs))``. The meta-loss is the inner least-squares
loss after ``T`` gradient steps from ``x0 = 0``. The surrogate gradient
differentiates the ``T=1`` loss only, which is biased relative to the
full horizon.

Both losses depend on the controller parameters only through the scalar
``eta``, so every parameter gradient here is ``dL/deta * deta/dtheta``.
"""

from __future__ import annotations

import numpy as np

from ..sampler import StreamKey
from .mlp import Mlp, mlp_backward, mlp_forward

__all__ = [
    "UnrolledProblem",
    "unrolled_meta_loss",
    "unrolled_surrogate_grad",
    "FULL_HORIZON",
    "TRUNCATED_HORIZON",
]

FULL_HORIZON = 15
TRUNCATED_HORIZON = 1
# Controller output bias is shifted so every seed starts at this step size,
# inside the stable range of the 15-step inner loop.
INITIAL_LR = 0.1


class UnrolledProblem:
    serial = False

    def __init__(self, A, b, controller: Mlp, horizon: int = FULL_HORIZON,
                 scaled_inputs: bool = True):
        A = np.asarray(A, dtype=np.float64)
        self.A, self.b = A, np.asarray(b, dtype=np.float64)
        self.num_obs, self.inner_dim = A.shape
        gram = A.T @ A
        self.hessian = gram / self.num_obs
        self.shift = A.T @ self.b / self.num_obs
        gram_eigs = np.sort(np.linalg.eigvalsh(gram))
        self.eta_star = 2.0 * self.num_obs / (gram_eigs[0] + gram_eigs[-1])
        # controller input, ascending: spectrum of the inner-loss Hessian
        # A'A/M, or of A'A itself when ``scaled_inputs`` is off
        self.eigenvalues = gram_eigs / self.num_obs if scaled_inputs else gram_eigs
        self.x0 = np.zeros(self.inner_dim)
        x_opt = np.linalg.lstsq(A, self.b, rcond=None)[0]
        self.f_star = self.inner_loss(x_opt)
        if controller.sizes[0] != self.inner_dim or controller.sizes[-1] != 1:
            raise ValueError(f"controller sizes {controller.sizes} do not fit the problem")
        self.controller = controller
        self.horizon = horizon
        self.dim = controller.num_params

    @classmethod
    def from_seed(cls, seed: int, num_obs: int = 20, num_params: int = 10,
                  hidden=(32, 32, 32), horizon: int = FULL_HORIZON,
                  initial_lr: float = INITIAL_LR, scaled_inputs: bool = True):
        rng = StreamKey(int(seed), (0,)).generator()
        A = rng.standard_normal((num_obs, num_params))
        b = rng.standard_normal(num_obs)
        controller = Mlp.init([num_params, *hidden, 1], rng, output="softplus")
        problem = cls(A, b, controller, horizon, scaled_inputs)
        if initial_lr is not None:
            # softplus^-1(initial_lr) minus the current pre-activation
            z = np.log(np.expm1(initial_lr)) - np.log(np.expm1(problem.predicted_lr(problem.initial_params())))
            controller.biases[-1] = controller.biases[-1] + z
        return problem

    def initial_params(self) -> np.ndarray:
        return self.controller.flat()

    def inner_loss(self, x) -> float:
        r = self.A @ x - self.b
        return float(r @ r) / (2 * self.num_obs)

    def inner_grad(self, x):
        return self.hessian @ x - self.shift

    def predicted_lr(self, params) -> float:
        return float(mlp_forward(self.controller.with_flat(params), self.eigenvalues)[0])

    def loss_at_lr(self, eta: float, T: int) -> float:
        x = self.x0.copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(T):
                x = x - eta * self.inner_grad(x)
            return self.inner_loss(x)

    def dloss_dlr(self, eta: float, T: int) -> float:
        """``d f(x_T) / d eta`` by forward-mode recursion through the steps."""
        x = self.x0.copy()
        dx = np.zeros_like(x)
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(T):
                g = self.inner_grad(x)
                dx = dx - g - eta * (self.hessian @ dx)
                x = x - eta * g
            return float(self.inner_grad(x) @ dx)

    def _chain(self, params, dl_deta):
        model = self.controller.with_flat(params)
        grads, _ = mlp_backward(model, self.eigenvalues, np.array([dl_deta]))
        return grads.flat()

    def __call__(self, params) -> float:
        return unrolled_meta_loss(self, params, self.horizon)

    def lr_error(self, params) -> float:
        return abs(self.predicted_lr(params) - self.eta_star)

    def surrogate_grad(self, params, key=None) -> np.ndarray:
        return unrolled_surrogate_grad(self, params)

    def true_grad(self, params) -> np.ndarray:
        eta = self.predicted_lr(params)
        return self._chain(params, self.dloss_dlr(eta, self.horizon))


def unrolled_meta_loss(up: UnrolledProblem, params, T: int) -> float:
    """Inner loss after ``T`` steps at the controller's learning rate.

    A diverging inner loop yields a non-finite value, returned as is.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    return up.loss_at_lr(up.predicted_lr(params), T)


def unrolled_surrogate_grad(up: UnrolledProblem, params) -> np.ndarray:
    """Exact gradient of the one-step loss w.r.t. the controller parameters.

    ``dL/deta = -g0 . grad f(x0 - eta g0)`` with ``g0 = grad f(x0)``.
    """
    eta = up.predicted_lr(params)
    g0 = up.inner_grad(up.x0)
    dl_deta = -float(g0 @ up.inner_grad(up.x0 - eta * g0))
    return up._chain(params, dl_deta)
