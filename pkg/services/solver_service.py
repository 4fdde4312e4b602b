import logging
from pathlib import Path
from typing import Optional

import numpy as np

from models.constants import contraction_threshold
from models.errors import ConfigurationError, ContractViolation, PicardDivergence
from models.phase import DistributionField, NormSampler
from models.solver import PicardState, SolverConfig, panel_integrals
from runtime.pool import WorkerPool
from schemas.reports import ConservationReport, ConservationRow, NormEstimate, SolveReport, StabilityReport
from services.collision_service import CollisionService
from services.norm_service import NormService
from storage.checkpoints import CheckpointStore

logger = logging.getLogger("workbench")

# Допуск на отрицательные значения из-за недолета интерполяции
NONNEGATIVE_SLACK = 1e-8
# Относительный допуск сравнения ∥f0∥ ≤ M/2 на округление масштабирования
DATA_RADIUS_SLACK = 1e-12
# Запас дискретизации в оценке устойчивости
STABILITY_SLACK = 0.05


class SolverService:
    """
    Решатель Пикара для мягкой формы g(t) = f0 + ∫_0^t T^{−s}C[T^s g(s)] ds,
    где g(t) = T^{−t} f(t).
    """

    def __init__(self, cfg: SolverConfig, pool: WorkerPool, checkpoints: Optional[CheckpointStore] = None):
        self.cfg = cfg
        self.pool = pool
        self.collision = CollisionService(cfg.collision.transported(), pool)
        self.norms = NormService(pool)
        self.checkpoints = checkpoints
        self.rule = cfg.time_rule()

    def sampler(self) -> NormSampler:
        return NormSampler(grid=self.cfg.grid, n_random=self.cfg.norm_samples, seed=self.cfg.seed)

    def data_norm(self, f0: DistributionField) -> NormEstimate:
        return self.norms.estimate_norm(f0, self.cfg.weights, self.sampler())

    def check_regime(self, f0: DistributionField) -> NormEstimate:
        """
        Проверка условий теоремы: M < (24C)^{−1/2} и ∥f0∥ ≤ M/2.

        Raises:
            ConfigurationError: если режим сжатия нарушен
        """
        estimate = self.data_norm(f0)
        threshold = contraction_threshold(self.cfg.weights)
        radius = self.cfg.radius
        if radius >= threshold or estimate.value > 0.5 * radius * (1.0 + DATA_RADIUS_SLACK):
            detail = (
                f"contraction regime violated: M={radius:.6e}, порог (24C)^(-1/2)={threshold:.6e}, "
                f"∥f0∥={estimate.value:.6e}, M/2={0.5 * radius:.6e}"
            )
            logger.error(detail)
            raise ConfigurationError(detail, {"radius": radius, "threshold": threshold, "data_norm": estimate.value})
        return estimate

    def _weighted(self, values: np.ndarray) -> np.ndarray:
        X, V = self.cfg.grid.nodes()
        return self.cfg.weights.weight(X, V) * np.abs(values)

    def state_norm(self, state: PicardState) -> float:
        """|||g||| = max по срезам и узлам ⟨αx⟩^p⟨βv⟩^q |g(t_i)|"""
        return float(np.max(self._weighted(state.node_values()), initial=0.0))

    def difference_norm(self, a: PicardState, b: PicardState) -> float:
        return float(np.max(self._weighted(a.node_values() - b.node_values()), initial=0.0))

    def phi_map(self, g: PicardState, f0: DistributionField) -> PicardState:
        """
        Один шаг Φ(g) в узлах сетки на границах панелей.

        Args:
            g: текущий итерат
            f0: начальные данные

        Returns:
            PicardState: Φ(g) = f0 + D_new
        """
        X, V = self.cfg.grid.nodes()

        def integrand(s: float) -> np.ndarray:
            field = g.at(s)
            return self.collision.eval_C(field, X, V, shift=s)

        corrections = panel_integrals(self.rule, integrand)
        return PicardState(self.cfg.grid, self.rule, f0, corrections, iteration=g.iteration + 1)

    def picard_solve(self, f0: DistributionField) -> tuple[PicardState, list[float], float]:
        """
        Итерации g_{n+1} = Φ(g_n) от g_0 = 0.

        Returns:
            tuple: (решение, нормы приращений, эмпирический коэффициент сжатия κ̂)

        Raises:
            ConfigurationError: вне режима теоремы (если он проверяется)
            ContractViolation: итерат вышел из шара радиуса M
            PicardDivergence: нет сходимости за max_iterations шагов
        """
        if self.cfg.enforce_regime:
            self.check_regime(f0)
        logger.info(
            f"Решатель Пикара: T={self.cfg.horizon}, M={self.cfg.radius:.4e}, "
            f"узлов {self.cfg.grid.size}, панелей {self.rule.spec.panels}"
        )
        state = PicardState.zero(self.cfg.grid, self.rule)
        increments: list[float] = []
        for n in range(self.cfg.max_iterations):
            new_state = self.phi_map(state, f0)
            increment = self.difference_norm(new_state, state)
            new_state.increment = increment
            increments.append(increment)
            logger.debug(f"Итерация {n + 1}: приращение {increment:.3e}")
            if self.cfg.enforce_regime:
                norm = self.state_norm(new_state)
                if norm > self.cfg.radius:
                    detail = f"Итерат {n + 1} вышел из шара: |||g|||={norm:.6e} > M={self.cfg.radius:.6e}"
                    logger.error(detail)
                    raise ContractViolation(detail, {"iteration": n + 1, "norm": norm})
            state = new_state
            if increment <= self.cfg.tolerance:
                kappa = self.contraction_factor(increments)
                logger.info(f"Сходимость за {n + 1} итераций, κ̂={kappa:.3e}")
                return state, increments, kappa
        detail = f"Итерации Пикара не сошлись за {self.cfg.max_iterations} шагов"
        logger.error(detail)
        raise PicardDivergence(detail, increments)

    def contraction_factor(self, increments: list[float]) -> float:
        """κ̂: максимум отношений соседних приращений выше порога остановки"""
        ratios = [
            increments[i] / increments[i - 1]
            for i in range(1, len(increments))
            if increments[i - 1] > self.cfg.tolerance
        ]
        return float(max(ratios, default=0.0))

    def mild_residual(self, state: PicardState, f0: DistributionField) -> float:
        """Взвешенная невязка мягкой формы: |||Φ(g) − g|||"""
        return self.difference_norm(self.phi_map(state, f0), state)

    def conservation_report(self, state: PicardState) -> ConservationReport:
        """
        Глобальные моменты ∫∫ f(t) φ dx dv для φ ∈ {1, v, |v|²}. Перенос сохраняет
        меру, поэтому моменты f(t) = T^t g(t) считаются по узлам g(t).
        """
        grid = self.cfg.grid
        X, V = grid.nodes()
        weights = grid.quadrature_weights()
        values = state.node_values()
        energy_density = np.sum(V * V, axis=-1)
        rows = []
        for t, g in zip(state.times, values):
            rows.append(
                ConservationRow(
                    time=float(t),
                    mass=float(np.sum(weights * g)),
                    momentum=[float(np.sum(weights * g * V[:, i])) for i in range(3)],
                    energy=float(np.sum(weights * g * energy_density)),
                )
            )
        first = rows[0]
        mass_scale = abs(first.mass)
        mass_drift = max(_drift(r.mass - first.mass, mass_scale) for r in rows)
        momentum_drift = max(
            _drift(float(np.linalg.norm(np.subtract(r.momentum, first.momentum))), mass_scale) for r in rows
        )
        energy_drift = max(_drift(r.energy - first.energy, abs(first.energy)) for r in rows)
        q = self.cfg.weights.q
        pointwise_mass, pointwise_energy = self._pointwise_drifts(state)
        report = ConservationReport(
            rows=rows,
            mass_drift=mass_drift,
            momentum_drift=momentum_drift,
            energy_drift=energy_drift,
            hypotheses={"mass": q > 4, "momentum": q > 5, "energy": q > 6},
            pointwise_mass_drift=pointwise_mass,
            pointwise_energy_drift=pointwise_energy,
        )
        logger.info(f"Сохранение: масса {mass_drift:.3e}, импульс {momentum_drift:.3e}, энергия {energy_drift:.3e}")
        return report

    def _pointwise_drifts(self, state: PicardState) -> tuple[float, float]:
        """Моменты по v в узлах x для f(t, x, v) = g(t)(x − tv, v): только диагностика"""
        grid = self.cfg.grid
        X, V = grid.nodes()
        n_cells = 1 if grid.homogeneous else grid.n_x**3
        wv = grid.axis_weights(grid.v_max, grid.n_v)
        v_weights = np.multiply.outer(np.multiply.outer(wv, wv), wv).ravel()
        energy_density = np.sum(V * V, axis=-1).reshape(n_cells, -1)
        masses, energies = [], []
        for i, t in enumerate(state.times):
            values = state.slice_field(i).evaluate(X - t * V, V).reshape(n_cells, -1)
            masses.append(values @ v_weights)
            energies.append((values * energy_density) @ v_weights)
        mass_scale = float(np.max(np.abs(masses[0]), initial=0.0))
        energy_scale = float(np.max(np.abs(energies[0]), initial=0.0))
        mass_drift = max(_drift(float(np.max(np.abs(m - masses[0]))), mass_scale) for m in masses)
        energy_drift = max(_drift(float(np.max(np.abs(e - energies[0]))), energy_scale) for e in energies)
        return mass_drift, energy_drift

    def nonnegativity(self, state: PicardState, data_norm: float) -> tuple[float, bool]:
        min_value = float(np.min(state.node_values()))
        return min_value, min_value >= -NONNEGATIVE_SLACK * data_norm

    def checkpoint(self, state: PicardState, directory: Path, label: str = "solution") -> list[str]:
        """Запись каждого среза по времени в отдельный файл"""
        if self.checkpoints is None:
            return []
        paths = []
        values = state.node_values()
        for i, t in enumerate(state.times):
            path = self.checkpoints.save(
                Path(directory) / f"{label}_{i:03d}.bin",
                self.cfg.grid,
                values[i],
                self.cfg.weights,
                label=f"{label} t={t:g}",
            )
            paths.append(str(path))
        return paths

    def solve(self, f0: DistributionField, out_dir: Optional[Path] = None) -> tuple[PicardState, SolveReport]:
        """Полный прогон: решение, невязка, ограниченность, неотрицательность, сохранение"""
        data = self.data_norm(f0)
        state, increments, kappa = self.picard_solve(f0)
        solution_norm = self.state_norm(state)
        min_value, nonnegative = self.nonnegativity(state, data.value)
        report = SolveReport(
            converged=True,
            iterations=len(increments),
            increments=increments,
            kappa=kappa,
            radius=self.cfg.radius,
            threshold=contraction_threshold(self.cfg.weights),
            data_norm=data,
            solution_norm=solution_norm,
            bound_ratio=solution_norm / data.value if data.value > 0 else 0.0,
            tail_bound=self.cfg.grid.tail_bound(self.cfg.weights),
            mild_residual=self.mild_residual(state, f0),
            min_value=min_value,
            nonnegative=nonnegative,
            conservation=self.conservation_report(state),
            checkpoints=self.checkpoint(state, out_dir) if out_dir is not None else [],
        )
        return state, report

    def stability_compare(self, f0: DistributionField, g0: DistributionField) -> StabilityReport:
        """
        Отношение |||g_f − g_g||| / ∥f0 − g0∥; при совпадающих данных 0 по соглашению.
        """
        state_f, _, _ = self.picard_solve(f0)
        state_g, _, _ = self.picard_solve(g0)
        difference = self.difference_norm(state_f, state_g)
        data_difference = self.norms.weighted_norm(f0 - g0, self.cfg.weights, self.sampler())
        ratio = difference / data_difference if data_difference > 0 else 0.0
        data_norm = self.data_norm(f0).value
        bound_ratio = self.state_norm(state_f) / data_norm if data_norm > 0 else 0.0
        passed = ratio <= 2.0 + STABILITY_SLACK and bound_ratio <= 2.0 + STABILITY_SLACK
        logger.info(f"Устойчивость: отношение {ratio:.4f}, ограниченность {bound_ratio:.4f}")
        return StabilityReport(
            ratio=ratio,
            difference_norm=difference,
            data_difference_norm=data_difference,
            bound_ratio=bound_ratio,
            passed=passed,
        )


def _drift(change: float, scale: float) -> float:
    change = abs(change)
    return change / scale if scale > 0 else change
