import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models.quadrature import (
    BoxRuleSpec,
    LineRule,
    SphereKernel,
    SphereRuleSpec,
    TimeRule,
    TimeRuleSpec,
    build_box_rule,
    build_sphere_rule,
    integrate_line,
    integrate_sphere,
    integrate_time,
    integrate_velocity_box,
)


@pytest.mark.parametrize("kernel, total", [(SphereKernel.UNIFORM, 4.0 * np.pi), (SphereKernel.INVERSE_SINE, 2.0 * np.pi**2)])
def test_sphere_rule_total_weight(kernel, total):
    rule = build_sphere_rule(SphereRuleSpec(n_theta=5, n_phi=8, kernel=kernel))
    assert rule.weights.sum() == pytest.approx(total, rel=1e-13)
    assert rule.total_weight == pytest.approx(total)
    assert_allclose(np.linalg.norm(rule.nodes, axis=-1), 1.0, rtol=1e-14)


def test_sphere_rule_antipodal_map():
    rule = build_sphere_rule(SphereRuleSpec(n_theta=4, n_phi=8))
    assert rule.antipodal
    assert_array_equal(rule.nodes[rule.antipode], -rule.nodes)
    assert not build_sphere_rule(SphereRuleSpec(n_theta=4, n_phi=7)).antipodal


def test_uniform_sphere_integrates_quadratic():
    """∫_{S²} z² dσ = 4π/3"""
    rule = build_sphere_rule(SphereRuleSpec(n_theta=4, n_phi=8))
    assert integrate_sphere(rule, lambda s: s[:, 2] ** 2) == pytest.approx(4.0 * np.pi / 3.0, rel=1e-13)


def test_aligned_nodes_follow_axis():
    rule = build_sphere_rule(SphereRuleSpec(n_theta=3, n_phi=6))
    axes = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]])
    aligned = rule.aligned(axes)
    assert aligned.shape == (2, rule.nodes.shape[0], 3)
    for k in range(2):
        assert_allclose(aligned[k] @ axes[k], rule.nodes[:, 2], atol=1e-14)


def test_box_rule_polynomial_exactness():
    spec = BoxRuleSpec(n=3, v_max=2.0)
    rule = build_box_rule(spec)
    assert rule.degree == 5
    exact = (2.0 * 2.0**5 / 5.0) * 4.0**2
    assert integrate_velocity_box(rule, lambda v: v[:, 0] ** 4) == pytest.approx(exact, rel=1e-13)


def test_time_rule():
    rule = TimeRule(TimeRuleSpec(panels=3, order=2), 1.5)
    assert rule.weights.sum() == pytest.approx(1.5)
    assert_allclose(rule.edges, [0.0, 0.5, 1.0, 1.5])
    assert_array_equal(rule.panel, [0, 0, 1, 1, 2, 2])
    assert integrate_time(rule, lambda s: s**3) == pytest.approx(1.5**4 / 4.0, rel=1e-13)


def test_time_rule_edge_cases():
    assert not np.any(TimeRule(TimeRuleSpec(), 0.0).weights)
    with pytest.raises(ValueError):
        TimeRule(TimeRuleSpec(), -1.0)


def test_line_rule_cauchy_integral():
    rule = LineRule(n=16)
    assert integrate_line(rule, lambda s: 1.0 / (1.0 + s * s)) == pytest.approx(np.pi, rel=1e-13)


def test_line_rule_half_line_with_jacobi_ends():
    """∫_0^∞ r²(1+r²)^{-3} dr = π/16"""
    rule = LineRule(n=32, lower=0.0, upper=np.inf, powers=(2.0, 2.0))
    assert rule.integrate(lambda r: r * r * (1.0 + r * r) ** -3) == pytest.approx(np.pi / 16.0, rel=1e-10)


def test_line_rule_rejects_empty_interval():
    with pytest.raises(ValueError):
        LineRule(lower=1.0, upper=1.0)
    with pytest.raises(ValueError):
        LineRule(scale=0.0)
