import numpy as np
import pytest

from guided_es.sampler import (
    StreamKey,
    antithetic_pair,
    covariance_trace,
    sample_perturbation,
    sample_perturbations,
    subspace_rank,
)
from guided_es.subspace import DegenerateSubspaceError
from guided_es.types import SearchConfig, SubspaceBasis

from conftest import orthonormal


def dense_sigma(cfg, u):
    n, k = u.shape
    return cfg.alpha / n * np.eye(n) + (1 - cfg.alpha) / k * u @ u.T


def test_isotropic_per_coordinate_variance():
    cfg = SearchConfig(alpha=1.0, sigma=0.1, param_dim=50)
    eps = sample_perturbations(cfg, None, StreamKey(3).generator(), 100_000)
    var = eps.var(axis=0)
    np.testing.assert_allclose(var, cfg.sigma**2 / cfg.param_dim, rtol=0.03)


def test_guided_covariance_matches_dense(rng):
    cfg = SearchConfig(alpha=0.5, sigma=0.1, subspace_dim=3, param_dim=100)
    u = orthonormal(rng, 100, 3)
    basis = SubspaceBasis.from_orthonormal(u)
    eps = sample_perturbations(cfg, basis, StreamKey(4).generator(), 200_000)
    emp = eps.T @ eps / len(eps)
    target = cfg.sigma**2 * dense_sigma(cfg, u)
    assert np.max(np.abs(emp - target)) <= 5e-3 * cfg.sigma**2


def test_trace_is_one(rng):
    for alpha in (0.0, 0.3, 1.0):
        cfg = SearchConfig(alpha=alpha, subspace_dim=4, param_dim=40)
        basis = SubspaceBasis.from_orthonormal(orthonormal(rng, 40, 4))
        assert covariance_trace(cfg, basis) == pytest.approx(1.0, abs=1e-12)


def test_warm_up_uses_effective_rank(rng):
    cfg = SearchConfig(alpha=0.5, subspace_dim=5, param_dim=20)
    cols = np.zeros((20, 5))
    cols[:, :2] = orthonormal(rng, 20, 2)
    basis = SubspaceBasis(cols, 2)
    assert subspace_rank(cfg, basis) == 2
    assert covariance_trace(cfg, basis) == pytest.approx(1.0, abs=1e-12)


def test_guided_without_basis_is_an_error():
    with pytest.raises(DegenerateSubspaceError):
        sample_perturbation(SearchConfig(alpha=0.5, param_dim=4), None,
                            np.random.default_rng(0))


def test_basis_dimension_checked(rng):
    cfg = SearchConfig(alpha=0.5, param_dim=4)
    with pytest.raises(ValueError):
        subspace_rank(cfg, SubspaceBasis.from_orthonormal(orthonormal(rng, 5, 1)))


def test_same_key_same_draw_and_children_differ():
    cfg = SearchConfig(alpha=1.0, param_dim=8)
    key = StreamKey(11, (2,))
    a = sample_perturbation(cfg, None, key.generator())
    b = sample_perturbation(cfg, None, key.generator())
    c = sample_perturbation(cfg, None, key.child(0).generator())
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_antithetic_pair_is_exact_negation(rng):
    cfg = SearchConfig(alpha=0.5, subspace_dim=2, param_dim=10)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, 10, 2))
    pair = antithetic_pair(cfg, basis, np.random.default_rng(1))
    np.testing.assert_array_equal(pair.negative, -pair.positive)


def test_antithetic_mean_within_standard_error(rng):
    cfg = SearchConfig(alpha=0.5, sigma=0.1, subspace_dim=3, param_dim=30)
    basis = SubspaceBasis.from_orthonormal(orthonormal(rng, 30, 3))
    pos = sample_perturbations(cfg, basis, np.random.default_rng(2), 10_000)
    bound = 4 * cfg.sigma * np.sqrt(covariance_trace(cfg, basis) / 10_000)
    assert np.linalg.norm(pos.mean(axis=0)) <= bound


def test_invariant_under_subspace_rotation(rng):
    cfg = SearchConfig(alpha=0.3, sigma=1.0, subspace_dim=3, param_dim=12)
    u = orthonormal(rng, 12, 3)
    r = orthonormal(rng, 3, 3)
    covs = []
    for basis_cols in (u, u @ r):
        eps = sample_perturbations(cfg, SubspaceBasis.from_orthonormal(basis_cols),
                                   np.random.default_rng(5), 200_000)
        covs.append(eps.T @ eps / len(eps))
    # both match the same dense covariance, hence each other
    target = dense_sigma(cfg, u)
    np.testing.assert_allclose(dense_sigma(cfg, u @ r), target, atol=1e-12)
    for cov in covs:
        assert np.max(np.abs(cov - target)) < 0.01 * np.max(target)
