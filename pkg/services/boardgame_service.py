import logging
from collections import deque
from itertools import product
from typing import Optional, Sequence

import numpy as np

from models.board import (
    BoardState,
    HistoryMap,
    applicable_moves,
    apply_move,
    echelon_bound,
    history_count,
    iter_histories,
)
from models.collision import CollisionConfig, Term
from models.errors import CapExceededError, ContractViolation
from models.marginal import FULL_TERMS, CollisionImage, Marginal, SwappedMarginal, TransportedMarginal
from models.quadrature import TimeRule, TimeRuleSpec
from runtime.pool import WorkerPool
from schemas.reports import IdentityReport, InvarianceReport, MoveRecord, ReductionTrace, UniquenessReport

logger = logging.getLogger("workbench")

IDENTITY_TOLERANCE = 1e-12
INVARIANCE_TOLERANCE = 1e-10


def reduce_to_echelon(state: BoardState, cap: Optional[int] = None) -> tuple[BoardState, list[MoveRecord]]:
    """
    Ходы в наименьшей допустимой позиции, пока они есть.

    Returns:
        tuple: конечное состояние (μ в верхней ступенчатой форме) и список ходов

    Raises:
        CapExceededError: если число ходов превысило |M_{n,k}|²
    """
    mu = state.mu
    cap = history_count(mu.k, mu.n) ** 2 if cap is None else cap
    trace: list[MoveRecord] = []
    while True:
        moves = applicable_moves(state)
        if not moves:
            return state, trace
        if len(trace) >= cap:
            raise CapExceededError(
                f"Приведение μ = {mu.values} не завершилось за {cap} ходов", {"mu": list(mu.values)}
            )
        state = apply_move(state, moves[0])
        trace.append(MoveRecord(position=moves[0], mu=list(state.mu.values), sigma=list(state.sigma)))


def reduction_trace(state: BoardState) -> ReductionTrace:
    final, moves = reduce_to_echelon(state)
    return ReductionTrace(
        k=state.mu.k,
        n=state.mu.n,
        start_mu=list(state.mu.values),
        start_sigma=list(state.sigma),
        echelon=list(final.mu.values),
        sigma=list(final.sigma),
        moves=moves,
    )


def partition_classes(k: int, n: int) -> dict[tuple[int, ...], list[HistoryMap]]:
    """Классы M_{n,k} по представителю, полученному приведением из σ = id"""
    classes: dict[tuple[int, ...], list[HistoryMap]] = {}
    for mu in iter_histories(k, n):
        final, _ = reduce_to_echelon(BoardState.start(mu))
        classes.setdefault(final.mu.values, []).append(mu)
    return classes


def count_echelon(k: int, n: int) -> int:
    """
    Число монотонных карт с проверкой оценки 2^{k+3n−2}.

    Raises:
        ContractViolation: если число превышает оценку
    """
    count = sum(1 for mu in iter_histories(k, n) if mu.is_echelon())
    bound = echelon_bound(k, n)
    if count > bound:
        detail = f"Число ступенчатых форм {count} превышает оценку {bound} (k={k}, n={n})"
        logger.error(detail)
        raise ContractViolation(detail, {"k": k, "n": n, "count": count, "bound": bound})
    return count


def reachable_echelon_forms(mu: HistoryMap) -> set[tuple[int, ...]]:
    """Все ступенчатые формы, достижимые из μ при любом порядке ходов"""
    start = BoardState.start(mu)
    seen = {mu.values}
    queue = deque([start])
    forms: set[tuple[int, ...]] = set()
    while queue:
        state = queue.popleft()
        moves = applicable_moves(state)
        if not moves:
            forms.add(state.mu.values)
        for j in moves:
            moved = apply_move(state, j)
            if moved.mu.values not in seen:
                seen.add(moved.mu.values)
                queue.append(moved)
    return forms


def uniqueness_report(k: int, n: int) -> UniquenessReport:
    """Эмпирическая проверка единственности представителя класса"""
    histories = 0
    counterexamples = []
    classes: set[tuple[int, ...]] = set()
    for mu in iter_histories(k, n):
        histories += 1
        forms = reachable_echelon_forms(mu)
        classes.update(forms)
        if len(forms) != 1:
            counterexamples.append({"mu": list(mu.values), "forms": sorted(list(f) for f in forms)})
    if counterexamples:
        logger.warning(f"Найдено {len(counterexamples)} карт с неединственной ступенчатой формой (k={k}, n={n})")
    return UniquenessReport(
        k=k,
        n=n,
        histories=histories,
        classes=len(classes),
        bound=echelon_bound(k, n),
        unique=not counterexamples,
        counterexamples=counterexamples,
    )


def swap_case(j: int, value: int) -> str:
    if value in (j, j + 2):
        return "swap_pair"
    if value in (j - 1, j + 1):
        return "shift_pair"
    return "outside"


class BoardGameService:
    """Численная проверка инвариантности интегралов Дюамеля относительно допустимых ходов"""

    def __init__(self, cfg: CollisionConfig, pool: WorkerPool):
        self.cfg = cfg
        self.pool = pool

    def verify_identity_swap(self, term, level: int, j: int, value: int, f: Marginal, X, V) -> IdentityReport:
        """
        S_{j,j+2} 𝔠^λ_{τ(μ),ℓ} f = 𝔠^λ_{μ,ℓ} S_{j,j+2} f, где τ = (j−1,j+1)∘(j,j+2).

        Args:
            term: слагаемое λ
            level: порядок ℓ функции f, ℓ ≥ j + 4
            j: позиция перестановки
            value: значение μ(ℓ) ∈ 1..ℓ−2
            f: функция порядка ℓ
            X, V: пробные точки порядка ℓ − 2
        """
        term = Term.parse(term)
        if level < j + 4 or f.order != level:
            raise ValueError(f"Тождество требует ℓ ≥ j + 4 и порядок f равный ℓ, получено ℓ={level}, j={j}")
        swapped_value = {j - 1: j + 1, j + 1: j - 1, j: j + 2, j + 2: j}.get(value, value)
        lhs = SwappedMarginal(CollisionImage(((term, 1.0),), swapped_value, f, self.cfg), j).evaluate(X, V)
        rhs = CollisionImage(((term, 1.0),), value, SwappedMarginal(f, j), self.cfg).evaluate(X, V)
        scale = float(np.max(np.abs(rhs), initial=0.0))
        difference = float(np.max(np.abs(lhs - rhs), initial=0.0))
        gap = difference / scale if scale > 0 else difference
        return IdentityReport(
            term=term.name,
            level=level,
            position=j,
            mu_value=value,
            case=swap_case(j, value),
            probes=int(np.asarray(X).shape[0]),
            max_gap=gap,
            scale=scale,
            passed=gap <= IDENTITY_TOLERANCE,
        )

    def duhamel_integrand(
        self,
        mu: HistoryMap,
        times: Sequence[float],
        m: Marginal,
        X,
        V,
        terms=FULL_TERMS,
    ) -> np.ndarray:
        """
        J_{n,k}(t; μ) m = T^{−t_{k+2}} 𝔠_{μ(k+2)} T^{t_{k+2}−t_{k+4}} ⋯ 𝔠_{μ(k+2n)} T^{t_{k+2n}} m.
        times[ℓ−1] соответствует позиции k+2ℓ.
        """
        if m.order != mu.k + 2 * mu.n:
            raise ValueError(f"Ожидалась функция порядка {mu.k + 2 * mu.n}, получен {m.order}")
        shifts = [0.0] + [float(t) for t in times]
        g: Marginal = TransportedMarginal(m, shifts[-1])
        for level in range(mu.n, 0, -1):
            g = CollisionImage(terms, mu.values[level - 1], g, self.cfg)
            g = TransportedMarginal(g, shifts[level - 1] - shifts[level])
        return g.evaluate(X, V)

    def simplex_nodes(self, n: int, t: float, order: int) -> tuple[np.ndarray, np.ndarray]:
        """
        Узлы упорядоченного симплекса t ≥ s_1 ≥ ... ≥ s_n ≥ 0 (замена Даффи).

        Returns:
            tuple: узлы формы (Q, n) и веса формы (Q,)
        """
        unit = TimeRule(TimeRuleSpec(panels=1, order=order), 1.0)
        nodes, weights = [], []
        for index in product(range(order), repeat=n):
            s = []
            weight = 1.0
            upper = t
            for i in index:
                weight *= upper * unit.weights[i]
                upper = upper * unit.nodes[i]
                s.append(upper)
            nodes.append(s)
            weights.append(weight)
        return np.asarray(nodes, dtype=float).reshape(-1, n), np.asarray(weights, dtype=float)

    def nested_duhamel(self, state: BoardState, m: Marginal, t: float, X, V, order: int = 2) -> np.ndarray:
        """
        𝓘_{n,k}(μ, σ) m: интеграл J_{n,k} по t ≥ t_{σ(k+2)} ≥ ... ≥ t_{σ(k+2n)} ≥ 0
        для свободно переносимой f^{(k+2n)}(s) = T^s m.
        """
        mu = state.mu
        nodes, weights = self.simplex_nodes(mu.n, t, order)
        domain = mu.domain

        def run(i: int) -> np.ndarray:
            times = np.zeros(mu.n)
            for level, position in enumerate(state.sigma):
                times[domain.index(position)] = nodes[i, level]
            return weights[i] * self.duhamel_integrand(mu, times, m, X, V)

        parts = self.pool.map(run, range(len(weights)))
        total = np.zeros(np.asarray(X).shape[:-2])
        for part in parts:
            total = total + part
        return total

    def verify_move_invariance(
        self,
        state: BoardState,
        m: Marginal,
        t: float,
        X,
        V,
        labeled: bool = False,
        order: int = 2,
    ) -> InvarianceReport:
        """
        Сравнение 𝓘(μ, σ) m и 𝓘(μ′, σ′) m′ после одного допустимого хода, где
        m′ = S_{j,j+2} m для несимметричной m и m′ = m для симметричной.

        Raises:
            ValueError: если сферическое правило не антиподально симметрично
        """
        if not self.cfg.sphere_rule.antipodal:
            raise ValueError("Проверка инвариантности требует антиподально симметричного сферического правила")
        moves = applicable_moves(state)
        moved, moved_m = state, m
        if moves:
            moved = apply_move(state, moves[0])
            if labeled:
                moved_m = SwappedMarginal(m, moves[0])
        values = self.nested_duhamel(state, m, t, X, V, order)
        values_moved = values if moved is state else self.nested_duhamel(moved, moved_m, t, X, V, order)
        scale = float(np.max(np.abs(values), initial=0.0))
        difference = float(np.max(np.abs(values - values_moved), initial=0.0))
        gap = difference / scale if scale > 0 else difference
        logger.info(f"Инвариантность: μ={state.mu.values} → μ′={moved.mu.values}, отклонение {gap:.3e}")
        return InvarianceReport(
            mu=list(state.mu.values),
            sigma=list(state.sigma),
            mu_moved=list(moved.mu.values),
            sigma_moved=list(moved.sigma),
            labeled=labeled,
            probes=len(values),
            values=[float(v) for v in values],
            values_moved=[float(v) for v in values_moved],
            max_gap=gap,
            passed=gap <= INVARIANCE_TOLERANCE,
        )

    @staticmethod
    def swap_commutes_with_transport(f: Marginal, j: int, s: float, X, V) -> float:
        """max |S T^s f − T^s S f| в пробных точках"""
        left = SwappedMarginal(TransportedMarginal(f, s), j).evaluate(X, V)
        right = TransportedMarginal(SwappedMarginal(f, j), s).evaluate(X, V)
        return float(np.max(np.abs(left - right), initial=0.0))
