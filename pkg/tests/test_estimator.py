from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, strategies as st

from guided_es.estimator import (
    NonFiniteObjectiveError,
    estimate_gradient,
    expected_update,
    vanilla_gradient,
)
from guided_es.sampler import StreamKey, sample_perturbation
from guided_es.types import SearchConfig, SubspaceBasis

from conftest import orthonormal


def test_single_pair_on_linear_objective(rng):
    c = rng.standard_normal(20)
    cfg = SearchConfig(alpha=0.4, beta=2.0, sigma=0.1, subspace_dim=2, param_dim=20)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, 20, 2))
    key = StreamKey(7)
    g = estimate_gradient(lambda y: c @ y, np.zeros(20), cfg, basis, key).direction
    eps = sample_perturbation(cfg, basis, key.child(0).generator())
    np.testing.assert_allclose(g, cfg.beta / cfg.sigma**2 * eps * (eps @ c), rtol=1e-12)


def test_linear_mean_matches_expected_update(rng):
    n = 20
    c = rng.standard_normal(n)
    cfg = SearchConfig(alpha=0.4, beta=2.0, sigma=0.1, subspace_dim=2, param_dim=n)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, n, 2))
    from guided_es.sampler import sample_perturbations

    eps = sample_perturbations(cfg, basis, np.random.default_rng(9), 100_000)
    g = cfg.beta / cfg.sigma**2 * eps * (eps @ c)[:, None]
    target = expected_update(cfg, basis, c)
    assert np.linalg.norm(g.mean(axis=0) - target) <= 0.02 * np.linalg.norm(target)


def test_constant_objective_gives_zero(rng):
    cfg = SearchConfig(alpha=1.0, pairs=3, param_dim=6)
    g = vanilla_gradient(lambda y: 4.2, rng.standard_normal(6), cfg, StreamKey(0))
    np.testing.assert_array_equal(g.direction, 0.0)
    assert g.function_evals == 6


def test_alpha_one_matches_vanilla_bitwise(rng):
    n = 15
    cfg = SearchConfig(alpha=1.0, beta=1.0, sigma=0.05, pairs=4, subspace_dim=3, param_dim=n)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, n, 3))
    f = lambda y: float(np.sum(np.sin(y)) + y @ y)
    x = rng.standard_normal(n)
    guided = estimate_gradient(f, x, cfg, basis, StreamKey(42, (1,))).direction
    vanilla = vanilla_gradient(f, x, cfg, StreamKey(42, (1,))).direction
    assert np.array_equal(guided, vanilla)


def test_executor_result_is_bitwise_identical(rng):
    n = 30
    cfg = SearchConfig(alpha=0.5, pairs=8, subspace_dim=2, param_dim=n)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, n, 2))
    f = lambda y: float(np.cos(y).sum())
    x = rng.standard_normal(n)
    serial = estimate_gradient(f, x, cfg, basis, StreamKey(3)).direction
    with ThreadPoolExecutor(4) as pool:
        threaded = estimate_gradient(f, x, cfg, basis, StreamKey(3), pool).direction
    assert np.array_equal(serial, threaded)


def test_even_terms_cancel(rng):
    n = 10
    h = rng.standard_normal((n, n))
    c = rng.standard_normal(n)
    f = lambda y: float(y @ h @ y + c @ y)
    cfg = SearchConfig(alpha=0.5, beta=2.0, sigma=0.3, subspace_dim=2, param_dim=n)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, n, 2))
    x = rng.standard_normal(n)
    key = StreamKey(8)
    g = estimate_gradient(f, x, cfg, basis, key).direction
    eps = sample_perturbation(cfg, basis, key.child(0).generator())
    grad = (h + h.T) @ x + c
    np.testing.assert_allclose(g, cfg.beta / cfg.sigma**2 * eps * (eps @ grad), rtol=1e-9)


def test_antithetic_symmetry_bitwise(rng):
    f = lambda y: float(np.exp(y).sum())
    x = rng.standard_normal(5)
    eps = 0.1 * rng.standard_normal(5)
    a = eps * (f(x + eps) - f(x - eps))
    b = (-eps) * (f(x - eps) - f(x + eps))
    assert np.array_equal(a, b)


def test_pairs_average_uniformly(rng):
    cfg = SearchConfig(alpha=1.0, beta=2.0, sigma=0.1, pairs=3, param_dim=4)
    c = rng.standard_normal(4)
    key = StreamKey(5)
    g = vanilla_gradient(lambda y: c @ y, np.zeros(4), cfg, key).direction
    eps = [sample_perturbation(cfg, None, key.child(i).generator()) for i in range(3)]
    manual = sum(e * (2 * (e @ c)) for e in eps) * cfg.beta / (2 * cfg.sigma**2 * 3)
    np.testing.assert_allclose(g, manual, rtol=1e-12)


def test_variance_falls_as_one_over_pairs(rng):
    n = 10
    c = rng.standard_normal(n)
    f = lambda y: c @ y
    totals = {}
    for pairs in (1, 4):
        cfg = SearchConfig(alpha=1.0, beta=1.0, sigma=0.1, pairs=pairs, param_dim=n)
        gs = np.array([vanilla_gradient(f, np.zeros(n), cfg, StreamKey(pairs, (t,))).direction
                       for t in range(4000)])
        totals[pairs] = gs.var(axis=0).sum()
    assert totals[1] / totals[4] == pytest.approx(4.0, rel=0.1)


def test_non_finite_value_names_pair():
    cfg = SearchConfig(alpha=1.0, pairs=3, param_dim=2)
    calls = []

    def f(y):
        calls.append(y)
        return np.nan if len(calls) == 4 else 1.0

    with pytest.raises(NonFiniteObjectiveError) as info:
        vanilla_gradient(f, np.zeros(2), cfg, StreamKey(0))
    assert info.value.index == 1 and info.value.sign == "-"


def test_shape_checks(rng):
    cfg = SearchConfig(alpha=1.0, param_dim=3)
    with pytest.raises(ValueError):
        vanilla_gradient(lambda y: 0.0, np.zeros(4), cfg, StreamKey(0))
    with pytest.raises(ValueError):
        expected_update(cfg, None, np.zeros(4))


def test_expected_update_examples(rng):
    n, k = 12, 3
    u = orthonormal(rng, n, k)
    basis = SubspaceBasis.from_orthonormal(u)
    grad = rng.standard_normal(n)
    iso = SearchConfig(alpha=1.0, beta=2.0, subspace_dim=k, param_dim=n)
    np.testing.assert_allclose(expected_update(iso, None, grad), 2.0 / n * grad)
    sub = SearchConfig(alpha=0.0, beta=2.0, subspace_dim=k, param_dim=n)
    inside = u @ rng.standard_normal(k)
    np.testing.assert_allclose(expected_update(sub, basis, inside), 2.0 / k * inside, atol=1e-14)
    outside = grad - u @ (u.T @ grad)
    np.testing.assert_allclose(expected_update(sub, basis, outside), 0.0, atol=1e-14)


@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.0, 1.0),
       beta=st.floats(0.0, 10.0), k=st.integers(1, 5))
def test_descent_in_expectation(seed, alpha, beta, k):
    rng = np.random.default_rng(seed)
    n = 8
    cfg = SearchConfig(alpha=alpha, beta=beta, subspace_dim=k, param_dim=n)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, n, k))
    grad = rng.standard_normal(n) * rng.uniform(1e-3, 1e3)
    assert grad @ expected_update(cfg, basis, grad) >= 0.0
