import numpy as np
import pytest

from guided_es.types import (
    ConfigError,
    ErrorProfile,
    SearchConfig,
    SubspaceBasis,
    SubspaceTooLargeError,
    validate_config,
)


def test_protocol_defaults_validate():
    cfg = SearchConfig(alpha=0.5, beta=2.0, sigma=0.1, pairs=1, subspace_dim=10, param_dim=1000)
    assert validate_config(cfg) is cfg


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(alpha=-0.1), "alpha"),
        (dict(alpha=1.5), "alpha"),
        (dict(alpha=float("nan")), "alpha"),
        (dict(beta=-1.0), "beta"),
        (dict(sigma=0.0), "sigma"),
        (dict(sigma=float("inf")), "sigma"),
        (dict(pairs=0), "pairs"),
        (dict(pairs=1.5), "pairs"),
        (dict(pairs=True), "pairs"),
        (dict(subspace_dim=0), "subspace_dim"),
        (dict(param_dim=0), "param_dim"),
    ],
)
def test_invalid_fields_are_named(kwargs, field):
    base = dict(alpha=0.5, beta=2.0, sigma=0.1, pairs=1, subspace_dim=2, param_dim=5)
    base.update(kwargs)
    with pytest.raises(ConfigError) as info:
        validate_config(SearchConfig(**base))
    assert info.value.field == field


def test_subspace_larger_than_space():
    with pytest.raises(SubspaceTooLargeError):
        validate_config(SearchConfig(subspace_dim=6, param_dim=5))


def test_boundary_values_accepted():
    validate_config(SearchConfig(alpha=0.0, beta=0.0, subspace_dim=5, param_dim=5))
    validate_config(SearchConfig(alpha=1.0, param_dim=1))
    validate_config(SearchConfig(pairs=np.int64(3), param_dim=np.int64(4)))


def test_with_alpha_keeps_other_fields():
    cfg = SearchConfig(0.3, 1.5, 0.2, 4, 3, 50)
    out = cfg.with_alpha(1.0)
    assert out == SearchConfig(1.0, 1.5, 0.2, 4, 3, 50)


def test_basis_active_block():
    cols = np.zeros((4, 3))
    cols[0, 0] = cols[1, 1] = 1.0
    basis = SubspaceBasis(cols, 2)
    assert basis.active.shape == (4, 2)
    assert basis.dim == 4
    one = SubspaceBasis.from_orthonormal(np.array([0.0, 1.0, 0.0]))
    assert one.columns.shape == (3, 1) and one.effective_rank == 1


def test_error_profile_total():
    p = ErrorProfile(0.25, 1.5, 0.1)
    assert p.total == 1.75
