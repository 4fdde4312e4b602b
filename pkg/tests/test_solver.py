import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models.constants import contraction_threshold
from models.errors import ConfigurationError, PicardDivergence
from models.phase import WeightParams, ZeroField, equilibrium_field, gaussian_field
from models.quadrature import TimeRule, TimeRuleSpec
from models.solver import PicardState, panel_integrals
from schemas.reports import ConservationReport
from services.solver_service import SolverService
from storage.checkpoints import CheckpointStore
from main import main


def _initial(service: SolverService, fraction: float = 0.5):
    f = gaussian_field(amplitude=1.0, homogeneous=True)
    return f * (fraction * service.cfg.radius / service.data_norm(f).value)


def test_panel_integrals_accumulate():
    rule = TimeRule(TimeRuleSpec(panels=4, order=2), 2.0)
    integrals = panel_integrals(rule, lambda s: np.array([1.0, s]))
    assert integrals.shape == (5, 2)
    assert_allclose(integrals[:, 0], rule.edges)
    assert_allclose(integrals[:, 1], rule.edges**2 / 2.0, rtol=1e-14)


def test_picard_state_interpolates_between_slices(small_grid):
    rule = TimeRule(TimeRuleSpec(panels=2, order=1), 1.0)
    corrections = np.stack([np.zeros(small_grid.size), np.ones(small_grid.size), 3.0 * np.ones(small_grid.size)])
    state = PicardState(small_grid, rule, None, corrections)
    X, V = small_grid.nodes()
    assert_allclose(state.at(0.25).evaluate(X, V), 0.5)
    assert_allclose(state.at(1.0).evaluate(X, V), 3.0)
    with pytest.raises(ValueError):
        state.at(1.5)


def test_solve_in_contraction_regime(solver_config, pool):
    service = SolverService(solver_config, pool)
    f0 = _initial(service)
    state, report = service.solve(f0)
    assert report.converged
    assert report.iterations >= 2
    assert report.increments[-1] <= solver_config.tolerance
    assert report.bound_ratio <= 2.0
    assert report.mild_residual <= 2.0 * solver_config.tolerance
    assert report.nonnegative
    assert report.kappa < 1.0
    assert len(report.conservation.rows) == solver_config.time.panels + 1
    assert report.conservation.hypotheses == {"mass": False, "momentum": False, "energy": False}


def test_zero_data_gives_zero_solution(solver_config, pool):
    service = SolverService(solver_config, pool)
    state, increments, kappa = service.picard_solve(ZeroField())
    assert increments == [0.0]
    assert kappa == 0.0
    assert_array_equal(state.node_values(), 0.0)


def test_regime_violation_is_reported(solver_config, pool):
    threshold = contraction_threshold(solver_config.weights)
    service = SolverService(solver_config.model_copy(update={"radius": 1.1 * threshold}), pool)
    with pytest.raises(ConfigurationError, match="contraction regime violated"):
        service.picard_solve(gaussian_field(amplitude=1e-6, homogeneous=True))

    service = SolverService(solver_config, pool)
    with pytest.raises(ConfigurationError):
        service.picard_solve(_initial(service, fraction=0.9))


def test_divergence_after_iteration_cap(solver_config, pool):
    service = SolverService(solver_config.model_copy(update={"max_iterations": 1}), pool)
    with pytest.raises(PicardDivergence) as excinfo:
        service.picard_solve(_initial(service))
    assert len(excinfo.value.increments) == 1
    assert excinfo.value.exit_code == 1


def test_stability_of_solution_map(solver_config, pool):
    service = SolverService(solver_config, pool)
    f0 = _initial(service)
    report = service.stability_compare(f0, f0 * 0.9)
    assert report.passed
    assert report.ratio <= 2.0
    assert report.data_difference_norm == pytest.approx(0.1 * service.data_norm(f0).value, rel=1e-12)


def test_checkpoints_are_written(solver_config, pool, tmp_path):
    service = SolverService(solver_config, pool, CheckpointStore(tmp_path))
    state, report = service.solve(_initial(service), "slices")
    assert len(report.checkpoints) == solver_config.time.panels + 1
    loaded = CheckpointStore(tmp_path).load(report.checkpoints[-1])
    assert_allclose(loaded.values, state.node_values()[-1])
    assert loaded.weights == solver_config.weights


def test_equilibrium_is_a_fixed_point(solver_config, pool):
    # 1/f = a + b|v|² обнуляет интегранд на резонансном многообразии в каждом узле
    service = SolverService(solver_config, pool)
    f = equilibrium_field(solver_config.weights, homogeneous=True)
    f0 = f * (0.5 * service.cfg.radius / service.data_norm(f).value)
    state, increments, kappa = service.picard_solve(f0)
    X, V = solver_config.grid.nodes()
    expected = np.broadcast_to(f0.evaluate(X, V), state.node_values().shape)
    assert_allclose(state.node_values(), expected, rtol=1e-10, atol=0.0)
    assert len(increments) == 2
    assert increments[1] <= 1e-12 * increments[0]
    drifts = service.conservation_report(state)
    assert drifts.mass_drift <= 1e-12
    assert drifts.momentum_drift <= 1e-12
    assert drifts.energy_drift <= 1e-12


def test_conservation_drift_when_hypotheses_hold(solver_config, pool):
    w = WeightParams(p=2.0, q=7.0)
    cfg = solver_config.model_copy(update={"weights": w, "radius": 0.9 * contraction_threshold(w)})
    service = SolverService(cfg, pool)
    _, report = service.solve(_initial(service, fraction=0.02))
    conservation = report.conservation
    assert conservation.hypotheses == {"mass": True, "momentum": True, "energy": True}
    assert conservation.violations(1e-3) == {}
    assert conservation.mass_drift <= 1e-3
    assert conservation.momentum_drift <= 1e-3
    assert conservation.energy_drift <= 1e-3
    assert report.tail_bound == pytest.approx(cfg.grid.tail_bound(w))


def test_contraction_factor_shrinks_with_data(solver_config, pool):
    service = SolverService(solver_config, pool)
    _, _, large = service.picard_solve(_initial(service, fraction=0.5))
    _, _, small = service.picard_solve(_initial(service, fraction=0.1))
    assert 0.0 < small < large


def test_violations_only_for_laws_with_hypothesis():
    report = ConservationReport(
        rows=[],
        mass_drift=1e-2,
        momentum_drift=1e-2,
        energy_drift=1e-2,
        hypotheses={"mass": True, "momentum": True, "energy": False},
        pointwise_mass_drift=0.0,
        pointwise_energy_drift=0.0,
    )
    assert report.violations(1e-3) == {"mass": 1e-2, "momentum": 1e-2}


def test_solve_reruns_are_byte_identical(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(
        json.dumps(
            {
                "grid": {"n_x": 1, "n_v": 4},
                "quadrature": {"box_n": 4, "sphere_n_theta": 2, "sphere_n_phi": 4, "time_panels": 2},
                "solver": {"norm_samples": 64, "perturbation": 0.0, "checkpoints": False},
            }
        )
    )
    out = tmp_path / "out"
    args = ["--config", str(config), "--sequential", "--out", str(out), "solve"]
    first_status = main(args)
    first = (out / "solve.json").read_bytes()
    second_status = main(args)
    assert second_status == first_status
    assert (out / "solve.json").read_bytes() == first
