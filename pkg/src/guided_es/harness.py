"""Seeded multi-run experiments, aggregation, and CSV output.

One iteration of the guided loop: query the surrogate gradient, push it
into the subspace buffer, rebuild the basis, draw ``P`` antithetic pairs,
form the estimate, take an optimizer step. The true gradient is only ever
handed to the measurement code; update paths never see it.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import optimizers
from .analysis import error_surface, optimal_hyperparameters
from .estimator import NonFiniteObjectiveError, estimate_gradient, vanilla_gradient
from .problems import QuadraticProblem, SyntheticGradProblem, UnrolledProblem
from .problems import mlp as mlp_module
from .problems.synthetic import synthetic_model_update
from .sampler import StreamKey, sample_perturbation
from .subspace import DegenerateSubspaceError, SubspaceBuffer, basis_of, correlation
from .types import RunRecord, SearchConfig, SubspaceBasis, validate_config

__all__ = [
    "EXPERIMENTS",
    "ALGORITHMS",
    "ExperimentSpec",
    "AggregateResult",
    "run_experiment",
    "aggregate",
    "emit_csv",
    "load_csv",
    "emit_surface",
    "emit_regimes",
    "thread_count",
    "CSV_HEADER",
    "SURFACE_HEADER",
    "REGIMES_HEADER",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("quadratic", "unrolled", "synthetic",
               "bias_variance_surface", "hyperparam_regimes")
RUNNABLE = EXPERIMENTS[:3]
ALGORITHMS = ("guided_es", "vanilla_es", "sgd_surrogate", "adam_surrogate")
ES_ALGORITHMS = ("guided_es", "vanilla_es")

CSV_HEADER = ("iteration", "metric", "mean", "stderr", "stddev", "n_seeds",
              "fn_evals", "sg_evals")
SURFACE_HEADER = ("alpha", "beta", "bias", "variance", "total")
REGIMES_HEADER = ("k", "k_over_n", "rho", "alpha_star", "beta_star")

# Per-experiment protocol defaults. Learning rates for Adam baselines and
# for the synthetic-gradient ES runs are not published values.
DEFAULTS = {
    "quadratic": dict(
        iterations=10_000, sigma=0.1, pairs=1, subspace_dim=10,
        learning_rate={"guided_es": 0.2, "vanilla_es": 0.2,
                       "sgd_surrogate": 5e-3, "adam_surrogate": 1e-3},
    ),
    "unrolled": dict(
        iterations=2_000, sigma=0.01, pairs=1, subspace_dim=3,
        learning_rate={"guided_es": 0.5, "vanilla_es": 10.0,
                       "sgd_surrogate": 0.3, "adam_surrogate": 1e-3},
    ),
    "synthetic": dict(
        iterations=2_000, sigma=0.1, pairs=1, subspace_dim=1,
        # best of a 9-point log grid over [1e-3, 10]
        learning_rate={"guided_es": 0.3162, "vanilla_es": 0.3162,
                       "sgd_surrogate": 3.162e-3, "adam_surrogate": 3.162e-3},
    ),
}

# Stream path components under each (seed, iteration) key.
_SURROGATE, _PERTURB, _MODEL, _PROBE = 0, 1, 2, 3

THREADS_ENV = "GUIDED_ES_THREADS"


def thread_count(threads: Optional[int] = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, os.cpu_count() or 1))
    return max(1, int(threads))


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce a set of runs.

    ``None`` fields take the experiment's protocol default. ``problem``
    holds keyword overrides for the problem constructor (e.g. a smaller
    ``num_params`` for quick runs).
    """

    experiment: str
    algorithm: str
    seeds: tuple = tuple(range(10))
    iterations: Optional[int] = None
    learning_rate: Optional[float] = None
    alpha: float = 0.5
    beta: float = 2.0
    sigma: Optional[float] = None
    pairs: Optional[int] = None
    subspace_dim: Optional[int] = None
    optimizer: str = "sgd"
    problem: dict = field(default_factory=dict)

    def resolved(self) -> "ExperimentSpec":
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.experiment not in RUNNABLE:
            raise ValueError(
                f"{self.experiment!r} is an analysis export; use the "
                "'surface' or 'regimes' command instead")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        d = DEFAULTS[self.experiment]
        spec = ExperimentSpec(
            self.experiment, self.algorithm, tuple(int(s) for s in self.seeds),
            d["iterations"] if self.iterations is None else int(self.iterations),
            (d["learning_rate"][self.algorithm] if self.learning_rate is None
             else float(self.learning_rate)),
            float(self.alpha), float(self.beta),
            d["sigma"] if self.sigma is None else float(self.sigma),
            d["pairs"] if self.pairs is None else int(self.pairs),
            d["subspace_dim"] if self.subspace_dim is None else int(self.subspace_dim),
            self.optimizer, dict(self.problem),
        )
        if spec.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if spec.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        return spec


def build_problem(experiment: str, seed: int, **overrides):
    if experiment == "quadratic":
        return QuadraticProblem.from_seed(seed, **overrides)
    if experiment == "unrolled":
        return UnrolledProblem.from_seed(seed, **overrides)
    if experiment == "synthetic":
        return SyntheticGradProblem.from_seed(seed, **overrides)
    raise ValueError(f"no problem for experiment {experiment!r}")


def _initial_point(problem) -> np.ndarray:
    if isinstance(problem, UnrolledProblem):
        return problem.initial_params()
    return np.zeros(problem.dim)


class _Recorder:
    """Objective wrapper that keeps every evaluated ``(point, value)``."""

    serial = True

    def __init__(self, f):
        self.f = f
        self.points: list = []
        self.values: list = []

    def __call__(self, x):
        value = self.f(x)
        self.points.append(np.array(x, copy=True))
        self.values.append(value)
        return value


def _measure(problem, x):
    if isinstance(problem, QuadraticProblem):
        subopt = problem.suboptimality(x)
        return problem.f_star + subopt, subopt, {}
    loss = float(problem(x))
    extras = {}
    if isinstance(problem, UnrolledProblem):
        extras["lr_error"] = problem.lr_error(x)
    return loss, loss - problem.f_star, extras


def _surrogate_correlation(surrogate, true_grad, basis: Optional[SubspaceBasis]) -> float:
    if basis is None:
        norm = np.linalg.norm(surrogate)
        if norm == 0.0:
            return 0.0
        basis = SubspaceBasis.from_orthonormal(surrogate / norm)
    return correlation(basis, true_grad).norm


def _run_seed(spec: ExperimentSpec, seed: int) -> List[RunRecord]:
    problem = build_problem(spec.experiment, seed, **spec.problem)
    n = problem.dim
    x = _initial_point(problem)
    cfg = validate_config(SearchConfig(spec.alpha, spec.beta, spec.sigma, spec.pairs,
                                       min(spec.subspace_dim, n), n))
    es = spec.algorithm in ES_ALGORITHMS
    if spec.algorithm == "adam_surrogate" or (es and spec.optimizer == "adam"):
        opt = optimizers.adam(spec.learning_rate, n)
    else:
        opt = optimizers.sgd(spec.learning_rate)
    buffer = SubspaceBuffer(cfg.subspace_dim, n)
    learns_model = isinstance(problem, SyntheticGradProblem)
    objective = _Recorder(problem) if learns_model else problem
    root = StreamKey(int(seed))

    fn_evals = sg_evals = 0
    loss, subopt, extras = _measure(problem, x)
    records = [RunRecord(0, loss, subopt, math.nan, 0, 0, seed, extras)]
    for t in range(1, spec.iterations + 1):
        key = root.child(t)
        rho = math.nan
        try:
            if spec.algorithm == "vanilla_es":
                est = vanilla_gradient(objective, x, cfg, key.child(_PERTURB))
                g = est.direction
                fn_evals += est.function_evals
            else:
                surrogate = problem.surrogate_grad(x, key.child(_SURROGATE))
                sg_evals += 1
                if spec.algorithm == "guided_es":
                    buffer.push(surrogate)
                    try:
                        basis = basis_of(buffer)
                        step_cfg = cfg
                    except DegenerateSubspaceError:
                        basis, step_cfg = None, cfg.with_alpha(1.0)
                    rho = (correlation(basis, problem.true_grad(x)).norm
                           if basis is not None else 0.0)
                    est = estimate_gradient(objective, x, step_cfg, basis,
                                            key.child(_PERTURB))
                    g = est.direction
                    fn_evals += est.function_evals
                else:
                    rho = _surrogate_correlation(surrogate, problem.true_grad(x), None)
                    g = surrogate
                    if learns_model:
                        # model training data drawn like isotropic ES samples
                        probe = cfg.with_alpha(1.0)
                        for i in range(cfg.pairs):
                            eps = sample_perturbation(
                                probe, None, key.child(_PROBE, i).generator())
                            objective(x + eps)
                            objective(x - eps)
            opt, x = optimizers.step(opt, x, g)
            if learns_model:
                problem.record(objective.points, objective.values)
                objective.points.clear()
                objective.values.clear()
                synthetic_model_update(problem, key.child(_MODEL))
            loss, subopt, extras = _measure(problem, x)
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss {loss!r}")
        except (NonFiniteObjectiveError, FloatingPointError) as exc:
            log.warning("seed %d aborted at iteration %d: %s", seed, t, exc)
            records.append(RunRecord(t, math.nan, math.nan, rho, fn_evals, sg_evals,
                                     seed, {}, failed=True, failure=str(exc)))
            break
        records.append(RunRecord(t, loss, subopt, rho, fn_evals, sg_evals, seed, extras))
    return records


def run_experiment(spec: ExperimentSpec, threads: Optional[int] = None) -> List[List[RunRecord]]:
    """Run every seed of ``spec``; returns one record stream per seed, in seed order."""
    spec = spec.resolved()
    if spec.algorithm in ES_ALGORITHMS and spec.optimizer == "adam":
        log.warning("Adam rescales ES estimates per coordinate; the composed "
                    "update is not guaranteed to be a descent direction")
    workers = min(thread_count(threads), len(spec.seeds))
    if workers == 1:
        return [_run_seed(spec, s) for s in spec.seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: _run_seed(spec, s), spec.seeds))


@dataclass
class AggregateResult:
    """Pointwise statistics across seeds, one row per (iteration, metric)."""

    rows: List[tuple]
    n_seeds: int
    failed_seeds: List[int]
    metadata: Dict = field(default_factory=dict)

    def series(self, metric: str, column: str = "mean") -> np.ndarray:
        j = CSV_HEADER.index(column)
        return np.array([r[j] for r in self.rows if r[1] == metric])


def _metric_names(record: RunRecord):
    return ["loss", "suboptimality", "correlation", *sorted(record.extras)]


def _metric(record: RunRecord, name: str) -> float:
    if name in ("loss", "suboptimality", "correlation"):
        return getattr(record, name)
    return record.extras[name]


def aggregate(streams: Sequence[Sequence[RunRecord]]) -> AggregateResult:
    """Mean, standard error and standard deviation across completed seeds.

    Seeds whose stream ends in a failure marker are left out and listed in
    ``failed_seeds``. With a single seed the spread columns are 0.
    """
    done = [s for s in streams if s and not s[-1].failed]
    failed = [s[-1].seed for s in streams if s and s[-1].failed]
    if not done:
        raise ValueError("no completed seeds to aggregate")
    length = len(done[0])
    if any(len(s) != length for s in done):
        raise ValueError("completed runs have different lengths")
    names = _metric_names(done[0][0])
    m = len(done)
    rows = []
    for i in range(length):
        first = done[0][i]
        for name in names:
            vals = np.array([_metric(s[i], name) for s in done], dtype=np.float64)
            mean = float(np.mean(vals))
            std = float(np.std(vals, ddof=1)) if m > 1 else 0.0
            rows.append((first.iteration, name, mean, std / math.sqrt(m), std, m,
                         first.function_evals, first.surrogate_grad_evals))
    meta = {"seeds": [s[0].seed for s in done], "failed_seeds": failed,
            "single_seed": m == 1}
    return AggregateResult(rows, m, failed, meta)


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return "%.17g" % value


def _atomic_write(path: str, header, rows, metadata: Optional[dict] = None) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    if metadata is not None:
        with open(path + ".meta.json", "w") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def emit_csv(result: AggregateResult, path: str, spec: Optional[ExperimentSpec] = None) -> str:
    """Write ``result`` with ``CSV_HEADER`` columns; floats at 17 significant digits.

    The file is written to a temporary name and moved into place, so a
    failure never leaves a partial CSV. A ``.meta.json`` sidecar records
    the spec, excluded seeds and the network initialization constant.
    """
    if result is None or not result.rows:
        raise ValueError("refusing to write an empty result")
    meta = dict(result.metadata)
    meta["mlp_init"] = {"scheme": "uniform(+-scale/sqrt(fan_in)), zero bias",
                        "scale": mlp_module.INIT_SCALE}
    if spec is not None:
        meta["spec"] = asdict(spec)
    return _atomic_write(path, CSV_HEADER, result.rows, meta)


def load_csv(path: str) -> List[tuple]:
    """Parse a file written by :func:`emit_csv` back into row tuples."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [(int(r[0]), r[1], float(r[2]), float(r[3]), float(r[4]), int(r[5]),
                 int(r[6]), int(r[7])) for r in reader]


def emit_surface(k: int, n: int, rho: float, grid: int, path: str,
                 beta_max: float = 4.0) -> str:
    """Bias/variance surface over ``alpha in [0, 1]`` x ``beta in [0, beta_max]``."""
    if grid < 2:
        raise ValueError("grid needs at least 2 points per axis")
    aa, bb, bias, var = error_surface(k, n, rho, np.linspace(0.0, 1.0, grid),
                                      np.linspace(0.0, beta_max, grid))
    rows = zip(aa.ravel(), bb.ravel(), bias.ravel(), var.ravel(), (bias + var).ravel())
    return _atomic_write(path, SURFACE_HEADER, rows)


def emit_regimes(n: int, path: str, rho_grid: int = 201, ks=None) -> str:
    """Optimal hyperparameters over subspace dimension and correlation."""
    ks = range(1, n + 1) if ks is None else ks
    rows = []
    for k in ks:
        for rho in np.linspace(0.0, 1.0, rho_grid):
            a, b = optimal_hyperparameters(k, n, float(rho))
            rows.append((k, k / n, float(rho), a, b))
    return _atomic_write(path, REGIMES_HEADER, rows)
