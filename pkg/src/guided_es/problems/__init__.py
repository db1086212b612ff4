"""Benchmark problems with surrogate-gradient oracles."""

from .mlp import Mlp, MlpGrads, mlp_backward, mlp_forward
from .quadratic import (QuadraticProblem, quadratic_loss, quadratic_surrogate_grad,
                        quadratic_true_grad)
from .synthetic import (ReplayBuffer, SyntheticGradProblem, synthetic_model_update,
                        synthetic_surrogate_grad)
from .unrolled import UnrolledProblem, unrolled_meta_loss, unrolled_surrogate_grad
