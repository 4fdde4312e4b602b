import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from models.phase import (
    GridField,
    GridLayout,
    GridSpec,
    NormSampler,
    WeightParams,
    ZeroField,
    bracket,
    gaussian_field,
    sample_field,
    weight_profile_field,
)
from runtime.seeding import derive_rng


def test_bracket():
    assert bracket([3.0, 4.0, 0.0]) == pytest.approx(np.sqrt(26.0))
    assert_allclose(bracket(np.zeros((2, 3))), [1.0, 1.0])


@pytest.mark.parametrize("params", [{"p": 1.0}, {"q": 3.0}, {"alpha": 0.0}, {"beta": -1.0}])
def test_weight_params_rejects_bad_exponents(params):
    with pytest.raises(ValidationError):
        WeightParams(**params)


def test_mu_prime(weights):
    w = weights.model_copy(update={"mu": 1.5})
    assert w.mu_prime == pytest.approx(1.5 + np.log(2.0))


def test_homogeneous_grid_nodes():
    grid = GridSpec(x_max=2.0, v_max=3.0, n_x=1, n_v=3)
    X, V = grid.nodes()
    assert grid.homogeneous
    assert X.shape == V.shape == (27, 3)
    assert not np.any(X)
    assert_allclose(np.unique(V), [-3.0, 0.0, 3.0])


@pytest.mark.parametrize("layout", list(GridLayout))
def test_quadrature_weights_cover_box(layout):
    grid = GridSpec(x_max=1.5, v_max=2.0, n_x=2, n_v=3, layout=layout)
    assert grid.quadrature_weights().sum() == pytest.approx(3.0**3 * 4.0**3)


def test_tail_tolerance_box(weights):
    grid = GridSpec.from_tail_tolerance(weights, n_x=1, n_v=4, tolerance=1e-4)
    assert bracket([grid.v_max, 0.0, 0.0]) ** (-weights.q) == pytest.approx(1e-4)
    assert bracket([grid.x_max, 0.0, 0.0]) ** (-weights.p) == pytest.approx(1e-4)
    with pytest.raises(ValueError):
        GridSpec.from_tail_tolerance(weights, n_x=1, n_v=4, tolerance=2.0)


def test_transport_shifts_accumulate():
    f = gaussian_field(amplitude=2.0, x_width=0.7)
    x = np.array([[0.3, -0.1, 0.2], [1.0, 0.5, -0.4]])
    v = np.array([[0.5, 0.5, 0.0], [-1.0, 0.2, 0.3]])
    assert_array_equal(f.transported(0.4).transported(0.6).evaluate(x, v), f.transported(1.0).evaluate(x, v))
    assert_allclose(f.transported(1.0).evaluate(x, v), f.evaluate(x - v, v))


def test_field_arithmetic():
    f = gaussian_field(amplitude=1.0)
    x = np.zeros((1, 3))
    v = np.zeros((1, 3))
    assert_allclose((f + f).evaluate(x, v), [2.0])
    assert_allclose((3.0 * f - f).evaluate(x, v), [2.0])
    assert_allclose(ZeroField().transported(5.0).evaluate(x, v), [0.0])


def test_grid_field_interpolation():
    grid = GridSpec(x_max=1.0, v_max=2.0, n_x=1, n_v=5)
    f = gaussian_field(amplitude=1.0, homogeneous=True)
    sampled = sample_field(f, grid)
    X, V = grid.nodes()
    assert_allclose(sampled.evaluate(X, V), f.evaluate(X, V), rtol=1e-14)
    outside = sampled.evaluate(np.zeros((1, 3)), np.array([[5.0, 0.0, 0.0]]))
    assert_array_equal(outside, [0.0])


def test_grid_field_rejects_non_finite():
    grid = GridSpec(x_max=1.0, v_max=1.0, n_x=1, n_v=2)
    values = np.ones(grid.size)
    values[3] = np.nan
    with pytest.raises(ValueError):
        GridField(grid, values)


def test_weight_profile_has_unit_norm(weights, rng):
    f = weight_profile_field(weights)
    X = rng.uniform(-5.0, 5.0, (100, 3))
    V = rng.uniform(-5.0, 5.0, (100, 3))
    assert_allclose(weights.weight(X, V) * f.evaluate(X, V), 1.0, rtol=1e-12)


def test_norm_sampler_points(small_grid):
    sampler = NormSampler(grid=small_grid, n_random=10, seed=3)
    X, V = sampler.points()
    assert X.shape == (small_grid.size + 10, 3)
    assert not np.any(X)
    assert np.all(np.abs(V) <= small_grid.v_max)
    with pytest.raises(ValueError):
        NormSampler().points()


def test_norm_sampler_is_seeded(small_grid):
    first = NormSampler(grid=small_grid, seed=11).particle_points(2, 5)
    second = NormSampler(grid=small_grid, seed=11).particle_points(2, 5)
    assert first[1].shape == (5, 2, 3)
    assert_array_equal(first[1], second[1])


def test_derive_rng_depends_on_name():
    a = derive_rng(1, "alpha").random(4)
    assert_array_equal(a, derive_rng(1, "alpha").random(4))
    assert not np.array_equal(a, derive_rng(1, "beta").random(4))
