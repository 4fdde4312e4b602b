from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from models.collision import CollisionConfig
from models.phase import DistributionField, GridField, GridSpec, WeightParams, ZeroField
from models.quadrature import TimeRule, TimeRuleSpec


class SolverConfig(BaseModel):
    """Параметры отображения Пикара Φ в переносимой системе отсчета"""
    model_config = ConfigDict(frozen=True)

    weights: WeightParams = WeightParams()
    grid: GridSpec
    collision: CollisionConfig = CollisionConfig()
    time: TimeRuleSpec = TimeRuleSpec()
    horizon: float = Field(..., gt=0)
    radius: float = Field(..., gt=0)
    max_iterations: int = Field(30, ge=1)
    tolerance: float = Field(1e-10, gt=0)
    enforce_regime: bool = True
    norm_samples: int = Field(0, ge=0)
    seed: int = 0

    def time_rule(self) -> TimeRule:
        return TimeRule(self.time, self.horizon)


def panel_integrals(rule: TimeRule, evaluate: Callable[[float], np.ndarray]) -> np.ndarray:
    """
    Накопленные интегралы ∫_0^{t_p} по границам панелей правила.

    Returns:
        np.ndarray: массив формы (P+1, ...), первая строка нулевая
    """
    values = [np.asarray(evaluate(float(s)), dtype=float) for s in rule.nodes]
    shape = values[0].shape if values else ()
    result = np.zeros((rule.spec.panels + 1,) + shape)
    for p in range(rule.spec.panels):
        acc = result[p].copy()
        for i in np.flatnonzero(rule.panel == p):
            acc = acc + rule.weights[i] * values[i]
        result[p + 1] = acc
    return result


class PicardState:
    """
    Итерат g(t) = base + D(t) на границах панелей; между границами D
    интерполируется линейно по времени.
    """

    def __init__(
        self,
        grid: GridSpec,
        rule: TimeRule,
        base: Optional[DistributionField],
        corrections: np.ndarray,
        iteration: int = 0,
        increment: Optional[float] = None,
    ):
        self.grid = grid
        self.rule = rule
        self.base = base if base is not None else ZeroField()
        self.corrections = np.asarray(corrections, dtype=float).reshape(rule.spec.panels + 1, grid.size)
        self.iteration = iteration
        self.increment = increment
        self._base_nodes: Optional[np.ndarray] = None

    @classmethod
    def zero(cls, grid: GridSpec, rule: TimeRule) -> "PicardState":
        return cls(grid, rule, None, np.zeros((rule.spec.panels + 1, grid.size)))

    @property
    def times(self) -> np.ndarray:
        return self.rule.edges

    def base_nodes(self) -> np.ndarray:
        if self._base_nodes is None:
            X, V = self.grid.nodes()
            self._base_nodes = np.asarray(self.base.evaluate(X, V), dtype=float)
        return self._base_nodes

    def node_values(self) -> np.ndarray:
        """Значения g(t_i) в узлах сетки, форма (P+1, N)"""
        return self.base_nodes()[None, :] + self.corrections

    def _field(self, correction: np.ndarray) -> DistributionField:
        if not np.any(correction):
            return self.base
        return self.base + GridField(self.grid, correction, description="correction")

    def slice_field(self, i: int) -> DistributionField:
        return self._field(self.corrections[i])

    def at(self, s: float) -> DistributionField:
        """
        g(s) с линейной интерполяцией между срезами.

        Raises:
            ValueError: если s вне [0, T]
        """
        t = self.rule.t
        if s < 0.0 or s > t * (1.0 + 1e-12):
            raise ValueError(f"Момент времени {s} вне интервала [0, {t}]")
        edges = self.times
        if t == 0.0:
            return self.slice_field(0)
        p = int(min(np.searchsorted(edges, s, side="right") - 1, len(edges) - 2))
        p = max(p, 0)
        theta = (s - edges[p]) / (edges[p + 1] - edges[p])
        correction = (1.0 - theta) * self.corrections[p] + theta * self.corrections[p + 1]
        return self._field(correction)
