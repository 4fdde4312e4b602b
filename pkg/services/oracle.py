import logging
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel

from models.collision import Term
from models.phase import DistributionField
from models.resonance import post_collision
from runtime.seeding import derive_rng

logger = logging.getLogger("workbench")


class OracleEstimate(BaseModel):
    """Оценка Монте-Карло со стандартной ошибкой"""
    value: float
    stderr: float
    samples: int
    seed: int

    def agrees(self, reference: float, sigmas: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.value - reference) <= sigmas * self.stderr + slack


class MonteCarloOracle:
    """
    Независимый оценщик интегралов столкновений: v1 из гауссовой
    предлагающей плотности, σ равномерно на S². Не разделяет с
    квадратурным путем ни узлов, ни генератора.
    """

    def __init__(
        self,
        seed: int,
        samples: int = 1_000_000,
        proposal_center=(0.0, 0.0, 0.0),
        proposal_width: float = 1.0,
        batch: int = 200_000,
    ):
        self.seed = seed
        self.samples = samples
        self.center = np.asarray(proposal_center, dtype=float)
        self.width = float(proposal_width)
        self.batch = batch

    def _estimate(self, name: str, integrand: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> OracleEstimate:
        rng = derive_rng(self.seed, f"oracle:{name}")
        total = 0.0
        total_sq = 0.0
        done = 0
        while done < self.samples:
            count = min(self.batch, self.samples - done)
            v1 = self.center + self.width * rng.standard_normal((count, 3))
            sigma = rng.standard_normal((count, 3))
            sigma /= np.linalg.norm(sigma, axis=-1, keepdims=True)
            offset = (v1 - self.center) / self.width
            density = np.exp(-0.5 * np.sum(offset * offset, axis=-1)) / ((2.0 * np.pi) ** 1.5 * self.width**3)
            # Плотность σ равна 1/4π
            values = integrand(v1, sigma) * (4.0 * np.pi) / density
            total += float(np.sum(values))
            total_sq += float(np.sum(values * values))
            done += count
        mean = total / done
        variance = max(total_sq / done - mean * mean, 0.0)
        estimate = OracleEstimate(value=mean, stderr=float(np.sqrt(variance / done)), samples=done, seed=self.seed)
        logger.debug(f"Оракул {name}: {estimate.value:.6e} ± {estimate.stderr:.2e}")
        return estimate

    def eval_L(self, j, g: DistributionField, h: DistributionField, l: DistributionField, x, v) -> OracleEstimate:
        term = Term.parse(j)
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)

        def integrand(v1: np.ndarray, sigma: np.ndarray) -> np.ndarray:
            v2, v3 = post_collision(v, v1, sigma)
            args = {
                Term.L0: (v1, v2, v3),
                Term.L1: (v, v2, v3),
                Term.L2: (v, v1, v3),
                Term.L3: (v, v1, v2),
            }[term]
            product = g.evaluate(x, args[0]) * h.evaluate(x, args[1]) * l.evaluate(x, args[2])
            return 0.125 * np.linalg.norm(v - v1, axis=-1) * product

        return self._estimate(f"L{term.value}", integrand)

    def eval_C(self, f: DistributionField, x, v) -> OracleEstimate:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)

        def integrand(v1: np.ndarray, sigma: np.ndarray) -> np.ndarray:
            v2, v3 = post_collision(v, v1, sigma)
            f0, f1, f2, f3 = (f.evaluate(x, w) for w in (v, v1, v2, v3))
            bracket = f1 * f2 * f3 + f0 * f2 * f3 - f0 * f1 * f3 - f0 * f1 * f2
            return 0.125 * np.linalg.norm(v - v1, axis=-1) * bracket

        return self._estimate("C", integrand)

    def weak_form_average(
        self,
        f: DistributionField,
        x,
        phi: Callable[[np.ndarray], np.ndarray],
        outer_center=(0.0, 0.0, 0.0),
        outer_width: Optional[float] = None,
    ) -> OracleEstimate:
        """Слабая форма: v и v1 независимо из гауссовых плотностей"""
        x = np.asarray(x, dtype=float)
        outer_center = np.asarray(outer_center, dtype=float)
        outer_width = self.width if outer_width is None else float(outer_width)
        rng = derive_rng(self.seed, "oracle:weak:outer")

        def integrand(v1: np.ndarray, sigma: np.ndarray) -> np.ndarray:
            z = rng.standard_normal(v1.shape)
            v = outer_center + outer_width * z
            density = np.exp(-0.5 * np.sum(z * z, axis=-1)) / ((2.0 * np.pi) ** 1.5 * outer_width**3)
            v2, v3 = post_collision(v, v1, sigma)
            f0, f1, f2, f3 = (f.evaluate(x, w) for w in (v, v1, v2, v3))
            bracket = f1 * f2 * f3 + f0 * f2 * f3 - f0 * f1 * f3 - f0 * f1 * f2
            combination = phi(v) + phi(v1) - phi(v2) - phi(v3)
            return 0.25 * 0.125 * np.linalg.norm(v - v1, axis=-1) * bracket * combination / density

        return self._estimate("weak", integrand)
