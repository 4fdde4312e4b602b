import logging

import numpy as np

from models.marginal import Marginal, TensorPower
from models.phase import DistributionField, NormSampler, WeightParams
from runtime.pool import WorkerPool
from schemas.reports import NormEstimate

logger = logging.getLogger("workbench")

# Размер блока выборки при распределении по потокам
SAMPLE_BLOCK = 50_000


class NormService:
    """Взвешенные sup-нормы ∥f∥ = sup ⟨αx⟩^p⟨βv⟩^q |f| на конечной выборке"""

    def __init__(self, pool: WorkerPool):
        self.pool = pool

    def _weighted_max(self, f: DistributionField, w: WeightParams, X: np.ndarray, V: np.ndarray) -> float:
        def run(block: slice) -> float:
            values = w.weight(X[block], V[block]) * np.abs(f.evaluate(X[block], V[block]))
            return float(np.max(values, initial=0.0))

        return max(self.pool.map(run, self.pool.chunks(X.shape[0], SAMPLE_BLOCK)), default=0.0)

    def weighted_norm(self, f: DistributionField, w: WeightParams, sampler: NormSampler) -> float:
        """
        Оценка нормы снизу: максимум по узлам сетки и квазислучайным точкам.

        Raises:
            ValueError: если выборка пуста
        """
        X, V = sampler.points()
        return self._weighted_max(f, w, X, V)

    def estimate_norm(self, f: DistributionField, w: WeightParams, sampler: NormSampler) -> NormEstimate:
        return NormEstimate(
            value=self.weighted_norm(f, w, sampler),
            grid_nodes=sampler.grid.size if sampler.grid is not None else 0,
            random_samples=sampler.n_random,
            seed=sampler.seed,
        )

    def marginal_norm(self, m: Marginal, w: WeightParams, sampler: NormSampler, probes: int = 64) -> float:
        """
        Норма k-частичной функции. Для тензорной степени используется
        факторизация ∥h^{⊗k}∥ = ∥h∥^k, иначе пробные точки sampler.particle_points.
        """
        if isinstance(m, TensorPower):
            return self.weighted_norm(m.field, w, sampler) ** m.order
        X, V = sampler.particle_points(m.order, probes)
        return self.marginal_norm_at(m, w, X, V)

    def marginal_norm_at(self, m: Marginal, w: WeightParams, X: np.ndarray, V: np.ndarray) -> float:
        values = w.weight_k(X, V) * np.abs(m.evaluate(X, V))
        return float(np.max(values, initial=0.0))
