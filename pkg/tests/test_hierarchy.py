import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from config.run_config import RunConfig
from models.collision import Term
from models.errors import ConfigurationError
from models.marginal import TensorPower
from models.phase import NormSampler, gaussian_field
from models.quadrature import BoxRuleSpec, TimeRuleSpec, build_box_rule
from services.collision_service import CollisionService
from services.hierarchy_service import (
    GaussianComponent,
    HierarchyService,
    MixtureData,
    hierarchy_collision,
    hierarchy_collision_sum,
    hierarchy_gain,
    hierarchy_loss,
)


def _single(mass=1.0):
    return MixtureData(weights=[1.0], components=[GaussianComponent(x_width=6.0, v_width=1.0, mass=mass)])


@pytest.fixture
def hierarchy_service(pool) -> HierarchyService:
    return HierarchyService(RunConfig().hierarchy_solver_config(), pool)


@pytest.mark.parametrize(
    "weights, count",
    [([0.5, 0.4], 2), ([1.2, -0.2], 2), ([], 0), ([0.5, 0.5], 1)],
)
def test_mixture_validation(weights, count):
    with pytest.raises(ValidationError):
        MixtureData(weights=weights, components=[GaussianComponent()] * count)


def test_mixture_from_json(tmp_path):
    path = tmp_path / "mix.json"
    path.write_text(json.dumps({"weights": [0.25, 0.75], "components": [{"v_width": 0.5}, {"mass": 1.0}]}))
    mix = MixtureData.from_json(path)
    assert mix.components[0].v_width == 0.5
    assert mix.marginal(3).order == 3
    assert [m.order for m in mix.sequence(2)] == [1, 2]


def test_homogeneous_component_has_requested_mass():
    # Ящик ±8 отбрасывает хвост за 9σ, 40 узлов Лежандра разрешают гауссиану до округления
    rule = build_box_rule(BoxRuleSpec(n=40, v_max=8.0))
    f = GaussianComponent(v_center=(0.5, 0.0, 0.0), v_width=0.8, mass=0.7).field(homogeneous=True)
    assert float(rule.weights @ f.evaluate(np.zeros(3), rule.nodes)) == pytest.approx(0.7, rel=1e-8)


def test_collision_sum_for_one_particle(pool, coarse_collision):
    h = gaussian_field(amplitude=0.5, homogeneous=True)
    sampler = NormSampler(v_max=2.0, seed=2, homogeneous=True)
    X, V = sampler.particle_points(1, 5)
    expected = CollisionService(coarse_collision, pool).eval_C(h, X[:, 0, :], V[:, 0, :])
    gain = CollisionService(coarse_collision, pool).gain(h, X[:, 0, :], V[:, 0, :])
    value = hierarchy_collision_sum(TensorPower(h, 3), X, V, coarse_collision)
    assert_allclose(value, expected, rtol=0.0, atol=1e-12 * np.max(gain))


def test_collision_sum_for_two_particles(pool, coarse_collision):
    """C^{4} h^{⊗4} = C[h]⊗h + h⊗C[h]"""
    h = gaussian_field(amplitude=0.5, homogeneous=True)
    sampler = NormSampler(v_max=2.0, seed=4, homogeneous=True)
    X, V = sampler.particle_points(2, 5)
    service = CollisionService(coarse_collision, pool)
    c = [service.eval_C(h, X[:, i, :], V[:, i, :]) for i in range(2)]
    f = [h.evaluate(X[:, i, :], V[:, i, :]) for i in range(2)]
    scale = max(float(np.max(service.gain(h, X[:, i, :], V[:, i, :]) * f[1 - i])) for i in range(2))
    value = hierarchy_collision_sum(TensorPower(h, 4), X, V, coarse_collision)
    assert_allclose(value, c[0] * f[1] + f[0] * c[1], rtol=0.0, atol=1e-12 * scale)


def test_gain_and_loss_split(coarse_collision):
    h = gaussian_field(amplitude=0.5, homogeneous=True)
    X, V = NormSampler(v_max=2.0, seed=6, homogeneous=True).particle_points(1, 3)
    m = TensorPower(h, 3)
    gain = hierarchy_gain(1, m, X, V, coarse_collision)
    terms = [hierarchy_collision(term, 1, m, X, V, coarse_collision) for term in Term]
    assert_allclose(gain, terms[0] + terms[1], rtol=1e-13)
    assert_allclose(hierarchy_loss(1, m, X, V, coarse_collision), terms[2] + terms[3], rtol=1e-13)


def test_admissible_mixture(hierarchy_service):
    mix = MixtureData(
        weights=[0.3, 0.7],
        components=[GaussianComponent(v_width=0.8), GaussianComponent(v_center=(0.5, 0.0, 0.0))],
    )
    report = hierarchy_service.admissibility_check(mix.sequence(3, homogeneous=True))
    assert report.passed
    assert report.mass == pytest.approx(1.0, abs=1e-6)
    assert len(report.consistency) == 2
    assert report.symmetry_gap <= 1e-14


def test_deficient_mass_is_flagged(hierarchy_service):
    report = hierarchy_service.admissibility_check(_single(mass=0.9).sequence(2, homogeneous=True))
    assert not report.passed
    assert report.mass == pytest.approx(0.9, rel=1e-8)
    assert report.consistency[0] == pytest.approx(0.1, rel=1e-6)


def test_admissibility_requires_two_levels(hierarchy_service):
    with pytest.raises(ValueError):
        hierarchy_service.admissibility_check(_single().sequence(1, homogeneous=True))
    with pytest.raises(ValueError):
        hierarchy_service.admissibility_check([_single().marginal(2), _single().marginal(1)])


def test_probe_modes(hierarchy_service):
    X, V = hierarchy_service.probe_points(2, 7, "grid")
    assert X.shape == V.shape == (7, 2, 3)
    X, V = hierarchy_service.probe_points(2, 7, "random")
    assert X.shape == (7, 2, 3)
    with pytest.raises(ValueError):
        hierarchy_service.probe_points(2, 7, "nodes")


def test_mixture_solution(hierarchy_service):
    path, report = hierarchy_service.mixture_solution(_single(), k_max=3, residual_levels=1, probes=32)
    tolerance = hierarchy_service.cfg.tolerance
    assert report.components == 1
    assert report.component_norms[0] <= report.data_radius
    assert report.hierarchy_bound_ok
    assert report.tensor_stability_ok
    assert report.residuals[1] <= 2.0 * tolerance
    residual = hierarchy_service.duhamel_residual(2, path, probes=16)
    assert residual.residual <= 2.0 * tolerance
    assert residual.times == pytest.approx(path.rule.edges.tolist())


@pytest.mark.parametrize("mode", ["grid", "random"])
def test_duhamel_residual_within_quadrature_error(hierarchy_service, mode):
    path, _ = hierarchy_service.mixture_solution(_single(), k_max=1, residual_levels=0)
    for k in (1, 2):
        residual = hierarchy_service.duhamel_residual(k, path, probes=8, mode=mode)
        assert residual.probe_mode == mode
        assert residual.quadrature_error >= 0.0
        assert residual.tolerance == hierarchy_service.cfg.tolerance
        assert residual.passed
        assert residual.residual <= 2.0 * (residual.tolerance + residual.quadrature_error)


def test_wrong_initial_data_fails_residual(hierarchy_service):
    path, _ = hierarchy_service.mixture_solution(_single(), k_max=1, residual_levels=0)
    wrong = TensorPower(gaussian_field(amplitude=1e-3, v_width=0.5), 1)
    residual = hierarchy_service.duhamel_residual(1, path, initial=wrong, probes=8, mode="random")
    assert not residual.passed


def test_extended_frame_matches_nodes(hierarchy_service):
    path, _ = hierarchy_service.mixture_solution(_single(), k_max=1, residual_levels=0)
    X, V = hierarchy_service.probe_points(1, 6, "grid")
    frames = hierarchy_service.extended_frame(1, path, X, V)
    nodes = np.stack([path.frame(1, float(t)).evaluate(X, V) for t in path.rule.edges])
    scale = float(np.max(np.abs(nodes)))
    # В узлах продолжение совпадает с Φ(g) и отличается от g не больше приращения
    assert_allclose(frames, nodes, rtol=0.0, atol=2.0 * hierarchy_service.cfg.tolerance + 1e-12 * scale)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_collision_image_factorizes_on_tensor_powers(pool, coarse_collision, k):
    """𝔠^λ_{j,k+2} h^{⊗(k+2)} = h^{⊗(j−1)} ⊗ L_λ(h, h, h) ⊗ h^{⊗(k−j)}"""
    h = gaussian_field(amplitude=0.5, homogeneous=True)
    X, V = NormSampler(v_max=2.0, seed=10 + k, homogeneous=True).particle_points(k, 3)
    service = CollisionService(coarse_collision, pool)
    single = [h.evaluate(X[:, i, :], V[:, i, :]) for i in range(k)]
    for j in range(1, k + 1):
        others = np.prod([single[i] for i in range(k) if i != j - 1], axis=0) if k > 1 else 1.0
        for term in Term:
            expected = service.eval_L(term, h, h, h, X[:, j - 1, :], V[:, j - 1, :]) * others
            value = hierarchy_collision(term, j, TensorPower(h, k + 2), X, V, coarse_collision)
            assert_allclose(value, expected, rtol=1e-12, atol=1e-14 * float(np.max(np.abs(expected))))


def test_hierarchy_norm(hierarchy_service):
    h = gaussian_field(amplitude=1e-3, homogeneous=False)
    w = hierarchy_service.cfg.weights
    sampler = hierarchy_service.sampler()
    single = hierarchy_service.norms.weighted_norm(h, w, sampler)
    marginals = [TensorPower(h, k) for k in (1, 2, 3)]
    expected = max(np.exp(w.mu * k) * single**k for k in (1, 2, 3))
    assert hierarchy_service.hierarchy_norm(marginals) == pytest.approx(expected, rel=1e-12)
    assert hierarchy_service.hierarchy_norm([]) == 0.0
    shifted = w.model_copy(update={"mu": 0.0})
    assert hierarchy_service.hierarchy_norm(marginals, shifted, sampler) == pytest.approx(single, rel=1e-12)


def test_hierarchy_regime_is_enforced(pool):
    cfg = RunConfig().hierarchy_solver_config()
    weak = cfg.model_copy(update={"weights": cfg.weights.model_copy(update={"mu": 1.0})})
    with pytest.raises(ConfigurationError, match="hierarchy regime violated"):
        HierarchyService(weak, pool).mixture_solution(_single())


def test_component_outside_data_ball(hierarchy_service):
    with pytest.raises(ConfigurationError):
        hierarchy_service.mixture_solution(_single(mass=100.0))


def test_apriori_hierarchy(hierarchy_service, weights):
    h = gaussian_field(amplitude=1.0, homogeneous=True)
    X, V = NormSampler(v_max=2.0, seed=8, homogeneous=True).particle_points(1, 4)
    for term in Term:
        report = hierarchy_service.verify_apriori_hierarchy(
            1, 1, term, TensorPower(h, 3), weights, 1.0, X, V, time=TimeRuleSpec(panels=2, order=2)
        )
        assert report.passed
        assert report.lemma == "apriori_hierarchy"
    with pytest.raises(ValueError):
        hierarchy_service.verify_apriori_hierarchy(1, 1, Term.L0, TensorPower(h, 4), weights, 1.0, X, V)
