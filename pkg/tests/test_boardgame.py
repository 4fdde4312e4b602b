import numpy as np
import pytest
from pydantic import ValidationError

from models.board import (
    BoardState,
    HistoryMap,
    applicable_moves,
    apply_move,
    echelon_bound,
    enumerate_histories,
    history_count,
    iter_histories,
)
from models.collision import CollisionConfig, Term
from models.errors import CapExceededError, ContractViolation
from models.marginal import LabeledProduct, TensorPower
from models.phase import NormSampler, gaussian_field
from models.quadrature import BoxRuleSpec, SphereRuleSpec
from services.boardgame_service import (
    BoardGameService,
    count_echelon,
    partition_classes,
    reduce_to_echelon,
    reachable_echelon_forms,
    reduction_trace,
    uniqueness_report,
)


@pytest.fixture
def tiny_collision() -> CollisionConfig:
    return CollisionConfig(box=BoxRuleSpec(n=2, v_max=3.0), sphere=SphereRuleSpec(n_theta=2, n_phi=2))


def _labeled(order: int) -> LabeledProduct:
    return LabeledProduct(
        [gaussian_field(amplitude=1.0, v_center=(0.2 * i, -0.1 * i, 0.0), homogeneous=True) for i in range(order)]
    )


@pytest.mark.parametrize("k, n, count", [(1, 2, 3), (2, 2, 8), (1, 3, 15)])
def test_history_count(k, n, count):
    assert history_count(k, n) == count
    assert len(enumerate_histories(k, n)) == count


def test_history_map_validation():
    mu = HistoryMap(k=2, n=2, values=(2, 4))
    assert mu.domain == (4, 6)
    assert mu(6) == 4
    with pytest.raises(ValidationError):
        HistoryMap(k=2, n=2, values=(3, 1))
    with pytest.raises(ValidationError):
        HistoryMap(k=2, n=2, values=(1,))
    with pytest.raises(ValueError):
        mu(5)


def test_board_state_requires_permutation():
    mu = HistoryMap(k=1, n=2, values=(1, 2))
    with pytest.raises(ValidationError):
        BoardState(mu=mu, sigma=(3, 3))


def test_single_move():
    state = BoardState.start(HistoryMap(k=2, n=2, values=(2, 1)))
    assert applicable_moves(state) == [4]
    moved = apply_move(state, 4)
    assert moved.mu.values == (1, 2)
    assert moved.sigma == (6, 4)
    assert applicable_moves(moved) == []
    with pytest.raises(ValueError):
        apply_move(moved, 4)


def test_every_move_decreases_termination_key():
    for mu in iter_histories(2, 3):
        state = BoardState.start(mu)
        for j in applicable_moves(state):
            assert apply_move(state, j).mu.termination_key() < mu.termination_key()


def test_reduction_reaches_echelon_form():
    trace = reduction_trace(BoardState.start(HistoryMap(k=1, n=3, values=(1, 3, 2))))
    assert HistoryMap(k=1, n=3, values=tuple(trace.echelon)).is_echelon()
    assert len(trace.moves) >= 1
    assert sorted(trace.sigma) == [3, 5, 7]
    final, moves = reduce_to_echelon(BoardState.start(HistoryMap(k=1, n=3, values=(1, 1, 1))))
    assert moves == []


@pytest.mark.parametrize("k, n, count, bound", [(2, 2, 7, 64), (1, 2, 3, 32)])
def test_count_echelon(k, n, count, bound):
    assert count_echelon(k, n) == count
    assert echelon_bound(k, n) == bound


def test_count_above_bound_is_a_contract_violation(monkeypatch):
    monkeypatch.setattr("services.boardgame_service.echelon_bound", lambda k, n: 1)
    with pytest.raises(ContractViolation) as excinfo:
        count_echelon(2, 2)
    assert excinfo.value.payload["count"] == 7
    assert excinfo.value.payload["bound"] == 1


def test_reachable_echelon_forms():
    assert reachable_echelon_forms(HistoryMap(k=2, n=2, values=(2, 1))) == {(1, 2)}
    assert reachable_echelon_forms(HistoryMap(k=2, n=2, values=(1, 2))) == {(1, 2)}
    for mu in iter_histories(1, 3):
        forms = reachable_echelon_forms(mu)
        assert forms
        assert all(HistoryMap(k=1, n=3, values=form).is_echelon() for form in forms)


def test_uniqueness_report():
    report = uniqueness_report(2, 2)
    assert report.unique
    assert report.counterexamples == []
    assert report.bound == 64
    wider = uniqueness_report(1, 3)
    assert wider.histories == 15
    assert wider.classes == count_echelon(1, 3)
    assert wider.unique == (not wider.counterexamples)


def test_classes_cover_histories():
    classes = partition_classes(2, 2)
    assert len(classes) == count_echelon(2, 2)
    assert sum(len(members) for members in classes.values()) == history_count(2, 2)
    for key in classes:
        assert HistoryMap(k=2, n=2, values=key).is_echelon()
    report = uniqueness_report(2, 2)
    assert report.histories == 8
    assert report.classes == 7


def test_enumeration_cap():
    with pytest.raises(CapExceededError):
        list(iter_histories(2, 3, cap=10))


def test_swap_commutes_with_transport():
    sampler = NormSampler(x_max=1.0, v_max=1.0, seed=5)
    X, V = sampler.particle_points(4, 6)
    f = LabeledProduct([gaussian_field(x_center=(0.1 * i, 0.0, 0.0)) for i in range(4)])
    assert BoardGameService.swap_commutes_with_transport(f, 2, 0.7, X, V) == 0.0


@pytest.mark.parametrize("value", [1, 2, 3, 4])
def test_identity_swap(tiny_collision, pool, value):
    service = BoardGameService(tiny_collision, pool)
    X, V = NormSampler(v_max=1.5, seed=3, homogeneous=True).particle_points(4, 3)
    report = service.verify_identity_swap(Term.L0, 6, 2, value, _labeled(6), X, V)
    assert report.passed
    assert report.max_gap <= 1e-12


def test_identity_swap_requires_long_enough_history(tiny_collision, pool):
    X, V = NormSampler(v_max=1.5, seed=3, homogeneous=True).particle_points(3, 2)
    with pytest.raises(ValueError):
        BoardGameService(tiny_collision, pool).verify_identity_swap(Term.L1, 5, 2, 1, _labeled(5), X, V)


def test_simplex_nodes_volume(tiny_collision, pool):
    nodes, weights = BoardGameService(tiny_collision, pool).simplex_nodes(2, 1.5, 3)
    assert weights.sum() == pytest.approx(1.5**2 / 2.0, rel=1e-13)
    assert np.all(nodes[:, 0] >= nodes[:, 1])
    assert np.all((nodes >= 0.0) & (nodes <= 1.5))


@pytest.mark.parametrize("labeled", [False, True])
def test_move_invariance(tiny_collision, pool, labeled):
    service = BoardGameService(tiny_collision, pool)
    state = BoardState.start(HistoryMap(k=2, n=2, values=(2, 1)))
    X, V = NormSampler(v_max=1.5, seed=1, homogeneous=True).particle_points(2, 2)
    m = _labeled(6) if labeled else TensorPower(gaussian_field(amplitude=1.0, homogeneous=True), 6)
    report = service.verify_move_invariance(state, m, 0.5, X, V, labeled=labeled, order=2)
    assert report.mu_moved == [1, 2]
    assert report.passed
    assert report.max_gap <= 1e-10


def test_invariance_requires_antipodal_rule(pool):
    cfg = CollisionConfig(box=BoxRuleSpec(n=2), sphere=SphereRuleSpec(n_theta=2, n_phi=3))
    state = BoardState.start(HistoryMap(k=2, n=2, values=(2, 1)))
    X, V = NormSampler(seed=1, homogeneous=True).particle_points(2, 1)
    with pytest.raises(ValueError):
        BoardGameService(cfg, pool).verify_move_invariance(state, TensorPower(gaussian_field(), 6), 0.5, X, V)
