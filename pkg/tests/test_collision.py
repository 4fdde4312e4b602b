from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models.collision import CollisionConfig, Term
from models.phase import GridSpec, NormSampler, ZeroField, equilibrium_field, gaussian_field
from models.quadrature import BoxRuleSpec, SphereRuleSpec
from runtime.pool import WorkerPool
from services.collision_service import CollisionService
from services.oracle import MonteCarloOracle


def _probes(count=6, seed=5):
    sampler = NormSampler(x_max=1.0, v_max=2.0, seed=seed)
    return sampler.random_points(count)


def test_term_parse():
    assert Term.parse("l2") is Term.L2
    assert Term.parse(3) is Term.L3
    assert Term.parse("1") is Term.L1
    with pytest.raises(ValueError):
        Term.parse("L7")
    assert [t.sign for t in Term] == [1.0, 1.0, -1.0, -1.0]


def test_collision_of_zero_field(coarse_collision, pool):
    X, V = _probes()
    service = CollisionService(coarse_collision, pool)
    assert_array_equal(service.eval_C(ZeroField(), X, V), np.zeros(len(X)))


def test_operator_is_sum_of_terms(coarse_collision, pool):
    f = gaussian_field(amplitude=0.5, x_width=1.5, v_center=(0.3, 0.0, -0.2))
    X, V = _probes()
    service = CollisionService(coarse_collision, pool)
    terms = [service.eval_L(term, f, f, f, X, V) for term in Term]
    total = terms[0] + terms[1] - terms[2] - terms[3]
    scale = max(float(np.max(np.abs(t))) for t in terms)
    assert_allclose(service.eval_C(f, X, V), total, rtol=0.0, atol=1e-12 * scale)
    assert_allclose(service.gain(f, X, V) - service.loss(f, X, V), service.eval_C(f, X, V), rtol=0.0, atol=1e-12 * scale)


def test_rayleigh_jeans_equilibrium_is_stationary(weights, pool):
    f = equilibrium_field(weights, homogeneous=True)
    cfg = CollisionConfig()
    service = CollisionService(cfg, pool)
    X, V = _probes(count=4)
    gain = service.gain(f, X, V)
    assert np.all(gain > 0)
    assert np.max(np.abs(service.eval_C(f, X, V))) <= 1e-12 * np.max(gain)


def test_weak_form_of_invariants(coarse_collision, pool):
    f = gaussian_field(amplitude=1.0, v_center=(0.5, 0.0, 0.0))
    service = CollisionService(coarse_collision, pool)
    x = np.zeros(3)
    for phi in (lambda v: np.ones(v.shape[:-1]), lambda v: v[..., 0], lambda v: np.sum(v * v, axis=-1)):
        average = service.weak_form_average(f, x, phi)
        magnitude = service.weak_form_magnitude(f, x, phi)
        assert magnitude > 0
        assert abs(average) <= 1e-12 * magnitude


def test_fiber_measure(pool):
    service = CollisionService(CollisionConfig(), pool)
    v = np.array([[0.0, 0.0, 0.0]])
    v1 = np.array([[3.0, 4.0, 0.0]])
    assert_allclose(service.fiber_measure(v, v1), [0.5 * np.pi * 5.0], rtol=1e-13)


def test_shift_requires_transported_frame(coarse_collision, pool):
    f = gaussian_field()
    X, V = _probes(count=2)
    with pytest.raises(ValueError):
        CollisionService(coarse_collision, pool).eval_C(f, X, V, shift=0.5)
    moved = CollisionService(coarse_collision.transported(), pool).eval_C(f, X, V, shift=0.5)
    assert moved.shape == (2,)


def test_threads_do_not_change_values(coarse_collision):
    f = gaussian_field(amplitude=0.8, x_width=2.0)
    X, V = _probes(count=9)
    cfg = coarse_collision.model_copy(update={"chunk_budget": 3 * 64 * 8 * 2})
    sequential = CollisionService(cfg, WorkerPool()).eval_C(f, X, V)
    with ThreadPoolExecutor(max_workers=3) as executor:
        threaded = CollisionService(cfg, WorkerPool(executor)).eval_C(f, X, V)
    assert_array_equal(sequential, threaded)


@pytest.fixture
def fine_collision() -> CollisionConfig:
    return CollisionConfig(box=BoxRuleSpec(n=24, v_max=6.0), sphere=SphereRuleSpec(n_theta=8, n_phi=16))


@pytest.mark.parametrize(
    "term, v, seed",
    [
        ("L0", (0.4, -0.2, 0.1), 17),
        ("L1", (0.0, 0.0, 0.0), 18),
        ("L2", (1.0, 0.5, -0.3), 19),
        ("L3", (-0.7, 0.2, 0.9), 20),
        ("C", (1.2, 0.0, 0.0), 21),
    ],
)
def test_monte_carlo_oracle_agrees_with_quadrature(fine_collision, pool, term, v, seed):
    f = gaussian_field(amplitude=1.0, homogeneous=True)
    x = np.zeros(3)
    v = np.asarray(v)
    service = CollisionService(fine_collision, pool)
    oracle = MonteCarloOracle(seed=seed, samples=20_000)
    if term == "C":
        reference = float(service.eval_C(f, x[None, :], v[None, :])[0])
        estimate = oracle.eval_C(f, x, v)
    else:
        reference = float(service.eval_L(Term.parse(term), f, f, f, x[None, :], v[None, :])[0])
        estimate = oracle.eval_L(Term.parse(term), f, f, f, x, v)
    assert estimate.samples == 20_000
    assert estimate.stderr > 0.0
    assert estimate.agrees(reference, sigmas=3.0)

def test_collision_field_matches_pointwise_values(coarse_collision, pool):
    grid = GridSpec(x_max=4.0, v_max=2.0, n_x=1, n_v=2)
    f = gaussian_field(amplitude=0.5, homogeneous=True)
    service = CollisionService(coarse_collision, pool)
    field = service.collision_field(f, grid)
    X, V = grid.nodes()
    assert_array_equal(field.values.ravel(), service.eval_C(f, X, V))


def test_moment_study_rows(coarse_collision, pool):
    f = gaussian_field(amplitude=1.0, homogeneous=True)
    rows = CollisionService(coarse_collision, pool).moment_study(f, np.zeros(3), lambda v: np.ones(v.shape[:-1]), [2, 4])
    assert [row.n for row in rows] == [2, 4]
    assert rows[0].reduction is None
    for row in rows:
        assert row.error == pytest.approx(abs(row.strong - row.weak))


def test_moment_study_error_shrinks_with_resolution(pool):
    # Сфера достаточно точна, чтобы ошибку определял ящик по скорости
    cfg = CollisionConfig(box=BoxRuleSpec(n=4, v_max=4.0), sphere=SphereRuleSpec(n_theta=8, n_phi=16))
    f = gaussian_field(amplitude=1.0, homogeneous=True)
    rows = CollisionService(cfg, pool).moment_study(f, np.zeros(3), lambda v: np.ones(v.shape[:-1]), [4, 8])
    assert rows[0].weak == 0.0
    assert rows[1].reduction >= 1.8
