import numpy as np
import pytest

from models.collision import CollisionConfig
from models.phase import GridSpec, WeightParams, gaussian_field
from models.quadrature import BoxRuleSpec, SphereRuleSpec, TimeRuleSpec
from models.solver import SolverConfig
from runtime.pool import WorkerPool


@pytest.fixture
def pool() -> WorkerPool:
    """Последовательный пул: результаты не зависят от числа потоков"""
    return WorkerPool()


@pytest.fixture
def weights() -> WeightParams:
    return WeightParams(p=2.0, q=4.0, alpha=1.0, beta=1.0)


@pytest.fixture
def coarse_collision() -> CollisionConfig:
    return CollisionConfig(box=BoxRuleSpec(n=4, v_max=4.0), sphere=SphereRuleSpec(n_theta=2, n_phi=4))


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec(x_max=4.0, v_max=4.0, n_x=1, n_v=4)


@pytest.fixture
def gaussian():
    return gaussian_field(amplitude=1.0, homogeneous=True)


@pytest.fixture
def solver_config(weights, small_grid, coarse_collision) -> SolverConfig:
    from models.constants import contraction_threshold

    return SolverConfig(
        weights=weights,
        grid=small_grid,
        collision=coarse_collision,
        time=TimeRuleSpec(panels=2, order=2),
        horizon=1.0,
        radius=0.9 * contraction_threshold(weights),
        norm_samples=0,
        seed=7,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
