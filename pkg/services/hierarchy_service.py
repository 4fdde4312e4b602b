import json
import logging
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from models.collision import CollisionConfig, Term
from models.constants import constant_C, hierarchy_constants
from models.errors import ConfigurationError
from models.marginal import FULL_TERMS, GAIN_TERMS, LOSS_TERMS, CollisionImage, Marginal, Mixture, TensorPower
from models.phase import DistributionField, NormSampler, WeightParams, gaussian_field
from models.quadrature import BoxRuleSpec, TimeRule, TimeRuleSpec, build_box_rule
from models.solver import PicardState, SolverConfig, panel_integrals
from runtime.pool import WorkerPool
from runtime.seeding import derive_rng
from schemas.reports import AdmissibilityReport, BoundReport, MixtureReport, ResidualReport
from services.collision_service import CollisionService
from services.norm_service import NormService
from services.solver_service import SolverService

logger = logging.getLogger("workbench")

WEIGHT_SUM_TOLERANCE = 1e-12
ADMISSIBILITY_TOLERANCE = 1e-4
HIERARCHY_BOUND_SLACK = 1e-9


class GaussianComponent(BaseModel):
    """Гауссова компонента смеси, нормированная на массу mass"""
    kind: Literal["gaussian"] = "gaussian"
    x_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    x_width: float = Field(1.0, gt=0)
    v_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    v_width: float = Field(1.0, gt=0)
    mass: float = Field(1.0, gt=0)

    def field(self, homogeneous: bool = False) -> DistributionField:
        if homogeneous:
            amplitude = self.mass / ((2.0 * np.pi) ** 1.5 * self.v_width**3)
        else:
            amplitude = self.mass / ((2.0 * np.pi) ** 3 * self.x_width**3 * self.v_width**3)
        return gaussian_field(
            amplitude=amplitude,
            x_center=self.x_center,
            x_width=self.x_width,
            v_center=self.v_center,
            v_width=self.v_width,
            homogeneous=homogeneous,
        )


class MixtureData(BaseModel):
    """Конечная смесь Σ w_i h_i^{⊗k}: веса и плотности компонент"""
    weights: list[float]
    components: list[GaussianComponent]

    @field_validator("weights")
    @classmethod
    def _check_weights(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("Смесь должна содержать хотя бы одну компоненту")
        if any(w < 0 for w in value):
            raise ValueError(f"Веса смеси должны быть неотрицательны, получено {value}")
        if abs(sum(value) - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"Сумма весов смеси должна быть равна 1, получено {sum(value):.15f}")
        return value

    @model_validator(mode="after")
    def _check_lengths(self) -> "MixtureData":
        if len(self.weights) != len(self.components):
            raise ValueError(
                f"Число весов ({len(self.weights)}) не совпадает с числом компонент ({len(self.components)})"
            )
        return self

    @classmethod
    def from_json(cls, path) -> "MixtureData":
        with open(path, encoding="utf-8") as f:
            return cls.model_validate(json.load(f))

    def fields(self, homogeneous: bool = False) -> list[DistributionField]:
        return [c.field(homogeneous) for c in self.components]

    def marginal(self, k: int, homogeneous: bool = False) -> Mixture:
        return Mixture(self.weights, [TensorPower(h, k) for h in self.fields(homogeneous)])

    def sequence(self, levels: int, homogeneous: bool = False) -> list[Mixture]:
        return [self.marginal(k, homogeneous) for k in range(1, levels + 1)]


class SolutionPath:
    """
    f^{(k)}(t) = (T^t g(t))^{⊗k} по решению уравнения в переносимой системе.
    frame(k, t) возвращает T_k^{−t} f^{(k)}(t) = g(t)^{⊗k}.
    """

    def __init__(self, state: PicardState):
        self.state = state
        self.rule = state.rule

    def marginal(self, k: int, s: float) -> Marginal:
        return TensorPower(self.state.at(s).transported(s), k)

    def frame(self, k: int, s: float) -> Marginal:
        return TensorPower(self.state.at(s), k)

    def initial(self, k: int) -> Marginal:
        return TensorPower(self.state.base, k)


class MixturePath:
    """Σ w_i f_i^{(k)}(t) по решениям для каждой компоненты"""

    def __init__(self, weights: Sequence[float], paths: Sequence[SolutionPath]):
        if len(weights) != len(paths) or not paths:
            raise ValueError("Число весов должно совпадать с числом решений")
        self.weights = tuple(weights)
        self.paths = tuple(paths)
        self.rule = paths[0].rule

    def marginal(self, k: int, s: float) -> Marginal:
        return Mixture(self.weights, [p.marginal(k, s) for p in self.paths])

    def frame(self, k: int, s: float) -> Marginal:
        return Mixture(self.weights, [p.frame(k, s) for p in self.paths])

    def initial(self, k: int) -> Marginal:
        return Mixture(self.weights, [p.initial(k) for p in self.paths])


def hierarchy_collision(term, j: int, m: Marginal, X, V, cfg: CollisionConfig) -> np.ndarray:
    """𝔠^λ_{j,k+2} m в точках (X_k, V_k)"""
    return CollisionImage(((Term.parse(term), 1.0),), j, m, cfg).evaluate(X, V)


def hierarchy_gain(j: int, m: Marginal, X, V, cfg: CollisionConfig) -> np.ndarray:
    return CollisionImage(GAIN_TERMS, j, m, cfg).evaluate(X, V)


def hierarchy_loss(j: int, m: Marginal, X, V, cfg: CollisionConfig) -> np.ndarray:
    return CollisionImage(LOSS_TERMS, j, m, cfg).evaluate(X, V)


def hierarchy_collision_sum(m: Marginal, X, V, cfg: CollisionConfig) -> np.ndarray:
    """
    C^{k+2} m = Σ_j (𝔠^{L0} + 𝔠^{L1} − 𝔠^{L2} − 𝔠^{L3})_{j,k+2} m.

    Args:
        m: функция порядка k+2
        X, V: точки формы (..., k, 3)
        cfg: общие квадратурные правила

    Returns:
        np.ndarray: значения формы (...)
    """
    total = 0.0
    for j in range(1, m.order - 1):
        total = total + CollisionImage(FULL_TERMS, j, m, cfg).evaluate(X, V)
    return np.asarray(total, dtype=float)


class HierarchyService:
    """Конечные срезы иерархии, построенные из решений уравнения"""

    def __init__(self, cfg: SolverConfig, pool: WorkerPool):
        self.cfg = cfg
        self.pool = pool
        self.norms = NormService(pool)

    def sampler(self) -> NormSampler:
        return NormSampler(grid=self.cfg.grid, n_random=self.cfg.norm_samples, seed=self.cfg.seed)

    def probe_points(self, k: int, count: int, mode: str = "grid") -> tuple[np.ndarray, np.ndarray]:
        """
        Пробные точки k частиц формы (count, k, 3).

        Args:
            k: число частиц
            count: число точек
            mode: "grid" (случайные узлы сетки для каждой частицы) или "random" (квазислучайные точки ящика)
        """
        if mode == "grid":
            X, V = self.cfg.grid.nodes()
            rng = derive_rng(self.cfg.seed, f"hierarchy:probes:{k}")
            index = rng.integers(0, self.cfg.grid.size, size=(count, k))
            return X[index], V[index]
        if mode == "random":
            return self.sampler().particle_points(k, count)
        raise ValueError(f"Неизвестный режим пробных точек: {mode}")

    def extended_frame(self, k: int, path, X: np.ndarray, V: np.ndarray) -> np.ndarray:
        """
        T_k^{−t}f^{(k)}(t) на границах панелей в произвольных точках. Значение
        g(t) вне узлов сетки продолжается мягкой формой g(t) = f0 + ∫_0^t C[T^s g(s)] ds
        с правилами решателя.

        Returns:
            np.ndarray: значения формы (P+1, ...)
        """
        paths = path.paths if isinstance(path, MixturePath) else (path,)
        weights = path.weights if isinstance(path, MixturePath) else (1.0,)
        collision = CollisionService(self.cfg.collision.transported(), self.pool)
        X_flat, V_flat = X.reshape(-1, 3), V.reshape(-1, 3)
        total = 0.0
        for weight, component in zip(weights, paths):
            state = component.state

            def integrand(s: float, state=state) -> np.ndarray:
                return collision.eval_C(state.at(s), X_flat, V_flat, shift=s)

            values = state.base.evaluate(X_flat, V_flat)[None, :] + panel_integrals(state.rule, integrand)
            values = values.reshape((len(state.rule.edges),) + X.shape[:-1])
            total = total + weight * np.prod(values, axis=-1)
        return np.asarray(total, dtype=float)

    def _duhamel_integrals(self, k: int, path, X, V, cfg: CollisionConfig, rule: TimeRule) -> np.ndarray:
        def integrand(s: float) -> np.ndarray:
            return hierarchy_collision_sum(path.marginal(k + 2, s), X + s * V, V, cfg)

        return panel_integrals(rule, integrand)

    def duhamel_residual(
        self,
        k: int,
        path,
        initial: Optional[Marginal] = None,
        probes: int = 64,
        mode: str = "grid",
    ) -> ResidualReport:
        """
        Невязка мягкой формы иерархии на границах панелей:
        T_k^{−t}f^{(k)}(t) − f_0^{(k)} − ∫_0^t T_k^{−s} C^{k+2} f^{(k+2)}(s) ds.

        Ошибка квадратуры оценивается повторным вычислением интеграла с
        удвоенными правилами по времени, ящику и сфере. Проверка проходит,
        если невязка не больше 2·(tol + ошибка квадратуры).

        Args:
            k: порядок проверяемого уравнения
            path: SolutionPath или MixturePath
            initial: f_0^{(k)}; по умолчанию берется из path
            probes: число пробных точек
            mode: режим пробных точек; в режиме "random" решение вне узлов
                продолжается мягкой формой (см. extended_frame)

        Returns:
            ResidualReport: взвешенный максимум по точкам и моментам времени
        """
        initial = path.initial(k) if initial is None else initial
        if initial.order != k:
            raise ValueError(f"Начальные данные порядка {initial.order} не согласованы с k={k}")
        rule = path.rule
        X, V = self.probe_points(k, probes, mode)
        cfg = self.cfg.collision
        integrals = self._duhamel_integrals(k, path, X, V, cfg, rule)

        refined_cfg = cfg.model_copy(
            update={
                "box": cfg.box.model_copy(update={"n": 2 * cfg.box.n}),
                "sphere": cfg.sphere.model_copy(
                    update={"n_theta": 2 * cfg.sphere.n_theta, "n_phi": 2 * cfg.sphere.n_phi}
                ),
            }
        )
        refined_rule = TimeRule(rule.spec.model_copy(update={"panels": 2 * rule.spec.panels}), rule.t)
        refined = self._duhamel_integrals(k, path, X, V, refined_cfg, refined_rule)[::2]

        if mode == "random":
            frames = self.extended_frame(k, path, X, V)
        else:
            frames = np.stack([path.frame(k, float(t)).evaluate(X, V) for t in rule.edges])
        start = initial.evaluate(X, V)
        weight = self.cfg.weights.weight_k(X, V)
        residual = float(np.max(weight * np.abs(frames - start - integrals), initial=0.0))
        quadrature_error = float(np.max(weight * np.abs(refined - integrals), initial=0.0))
        tolerance = self.cfg.tolerance
        passed = residual <= 2.0 * (tolerance + quadrature_error)
        log = logger.info if passed else logger.error
        log(
            f"Невязка иерархии k={k}: {residual:.3e}, ошибка квадратуры {quadrature_error:.3e} "
            f"({probes} точек, режим {mode})"
        )
        return ResidualReport(
            k=k,
            probes=probes,
            probe_mode=mode,
            residual=residual,
            quadrature_error=quadrature_error,
            tolerance=tolerance,
            passed=passed,
            times=rule.edges.tolist(),
        )

    def admissibility_check(
        self,
        marginals: Sequence[Marginal],
        homogeneous: bool = True,
        v_max: float = 6.0,
        x_max: float = 6.0,
        n: int = 24,
        probes: int = 16,
        tolerance: float = ADMISSIBILITY_TOLERANCE,
    ) -> AdmissibilityReport:
        """
        Допустимость последовательности g^{(1)}, ..., g^{(K)}: неотрицательность,
        симметрия, единичная масса g^{(1)} и g^{(k)} = ∫ g^{(k+1)} dx_{k+1} dv_{k+1}.

        Raises:
            ValueError: если K < 2 или порядки не равны 1..K
        """
        levels = len(marginals)
        if levels < 2:
            raise ValueError(f"Проверка допустимости требует K ≥ 2, получено {levels}")
        if [m.order for m in marginals] != list(range(1, levels + 1)):
            raise ValueError("Порядки функций должны быть 1..K по возрастанию")
        v_rule = build_box_rule(BoxRuleSpec(n=n, v_max=v_max))
        x_rule = None if homogeneous else build_box_rule(BoxRuleSpec(n=n, v_max=x_max))
        sampler = NormSampler(seed=self.cfg.seed, x_max=x_max, v_max=v_max, homogeneous=homogeneous)

        def integrate_last(m: Marginal, X: np.ndarray, V: np.ndarray) -> np.ndarray:
            """∫ m(X, x', V, v') dx' dv' для X, V формы (P, k, 3)"""
            P = X.shape[0]
            M = v_rule.nodes.shape[0]
            head_v = np.broadcast_to(V[:, None, :, :], (P, M) + V.shape[1:])
            tail_v = np.broadcast_to(v_rule.nodes[None, :, None, :], (P, M, 1, 3))
            args_v = np.concatenate([head_v, tail_v], axis=-2)
            head_x = np.broadcast_to(X[:, None, :, :], (P, M) + X.shape[1:])
            if x_rule is None:
                args_x = np.concatenate([head_x, np.zeros((P, M, 1, 3))], axis=-2)
                return m.evaluate(args_x, args_v) @ v_rule.weights
            total = np.zeros(P)
            for x_node, x_weight in zip(x_rule.nodes, x_rule.weights):
                tail_x = np.broadcast_to(x_node, (P, M, 1, 3))
                args_x = np.concatenate([head_x, tail_x], axis=-2)
                total = total + x_weight * (m.evaluate(args_x, args_v) @ v_rule.weights)
            return total

        min_value = np.inf
        symmetry_gap = 0.0
        consistency = []
        for m in marginals:
            k = m.order
            X, V = sampler.particle_points(k, probes)
            values = m.evaluate(X, V)
            min_value = min(min_value, float(np.min(values)))
            if k >= 2:
                order = np.arange(k)[::-1]
                swapped = m.evaluate(X[:, order, :], V[:, order, :])
                scale = float(np.max(np.abs(values), initial=0.0))
                gap = float(np.max(np.abs(values - swapped), initial=0.0))
                symmetry_gap = max(symmetry_gap, gap / scale if scale > 0 else gap)
            if k < levels:
                integrated = integrate_last(marginals[k], X, V)
                scale = float(np.max(np.abs(values), initial=0.0))
                diff = float(np.max(np.abs(values - integrated), initial=0.0))
                consistency.append(diff / scale if scale > 0 else diff)

        empty = np.zeros((1, 0, 3))
        mass = float(integrate_last(marginals[0], empty, empty)[0])
        X1, _ = sampler.particle_points(1, probes)
        pointwise = []
        for x in X1[:, 0, :]:
            args_x = np.broadcast_to(x, (v_rule.nodes.shape[0], 1, 3))
            pointwise.append(float(marginals[0].evaluate(args_x, v_rule.nodes[:, None, :]) @ v_rule.weights))

        nonnegative = min_value >= 0.0
        mass_error = abs(mass - 1.0)
        passed = (
            nonnegative
            and symmetry_gap <= tolerance
            and mass_error <= tolerance
            and all(c <= tolerance for c in consistency)
        )
        if not passed:
            logger.warning(
                f"Данные недопустимы: min={min_value:.3e}, симметрия {symmetry_gap:.3e}, "
                f"масса {mass:.6f}, согласованность {consistency}"
            )
        return AdmissibilityReport(
            levels=levels,
            min_value=min_value,
            nonnegative=nonnegative,
            symmetry_gap=symmetry_gap,
            mass=mass,
            mass_error=mass_error,
            consistency=consistency,
            tolerance=tolerance,
            passed=passed,
            pointwise_mass=pointwise,
        )

    def hierarchy_norm(self, marginals: Sequence[Marginal], w: Optional[WeightParams] = None, sampler=None) -> float:
        """sup_k e^{μk} ∥g^{(k)}∥_k для последовательности порядков 1..K"""
        w = w or self.cfg.weights
        sampler = sampler or self.sampler()
        return max(
            (float(np.exp(w.mu * m.order)) * self.norms.marginal_norm(m, w, sampler) for m in marginals),
            default=0.0,
        )

    def path_norm(self, path, k_max: int) -> float:
        """|||T^{−·}F(·)||| по границам панелей"""
        return max(
            self.hierarchy_norm([path.frame(k, float(t)) for k in range(1, k_max + 1)]) for t in path.rule.edges
        )

    def mixture_solution(
        self,
        mix: MixtureData,
        k_max: int = 3,
        residual_levels: int = 1,
        probes: int = 64,
    ) -> tuple[MixturePath, MixtureReport]:
        """
        Решение иерархии для конечной смеси: уравнение решается для каждой
        компоненты, f^{(k)}(t) = Σ w_i (T^t g_i(t))^{⊗k}.

        Raises:
            ConfigurationError: если e^{2μ} ≤ 32C или компонента вне шара e^{−μ′}
        """
        constants = hierarchy_constants(self.cfg.weights)
        if not constants.regime:
            detail = f"hierarchy regime violated: e^(2μ)={np.exp(2.0 * constants.mu):.6e} ≤ 32C={32.0 * constants.constant_C:.6e}"
            logger.error(detail)
            raise ConfigurationError(detail, constants.model_dump())
        cfg = self.cfg.model_copy(update={"radius": constants.radius, "enforce_regime": True})
        solver = SolverService(cfg, self.pool)
        homogeneous = cfg.grid.homogeneous
        fields = mix.fields(homogeneous)
        norms = [solver.data_norm(h).value for h in fields]
        for i, norm in enumerate(norms):
            if norm > constants.data_radius:
                detail = f"Компонента {i} вне шара: ∥h∥={norm:.6e} > e^(-μ′)={constants.data_radius:.6e}"
                logger.error(detail)
                raise ConfigurationError(detail, {"component": i, "norm": norm})

        # Вложенные вызовы пула из задач пула не используются: компоненты решаются по очереди
        states = [solver.picard_solve(h)[0] for h in fields]
        path = MixturePath(mix.weights, [SolutionPath(state) for state in states])
        norm = self.path_norm(path, k_max)
        bound_ok = norm <= 1.0 + HIERARCHY_BOUND_SLACK
        stability = None
        if len(states) == 1:
            state_norm = solver.state_norm(states[0])
            lhs = max(np.exp(constants.mu * k) * state_norm**k for k in range(1, k_max + 1))
            rhs = max(np.exp(constants.mu_prime * k) * norms[0] ** k for k in range(1, k_max + 1))
            stability = bool(lhs <= rhs * (1.0 + HIERARCHY_BOUND_SLACK))
        residuals = {
            k: self.duhamel_residual(k, path, probes=probes) for k in range(1, residual_levels + 1)
        }
        logger.info(
            f"Смесь из {len(states)} компонент: норма иерархии {norm:.3e}, "
            f"невязки { {k: r.residual for k, r in residuals.items()} }"
        )
        report = MixtureReport(
            components=len(states),
            k_max=k_max,
            component_norms=norms,
            data_radius=constants.data_radius,
            radius=constants.radius,
            hierarchy_norm=norm,
            hierarchy_bound_ok=bound_ok,
            tensor_stability_ok=stability,
            residuals={k: r.residual for k, r in residuals.items()},
            residuals_ok=all(r.passed for r in residuals.values()),
        )
        return path, report

    def verify_apriori_hierarchy(
        self,
        k: int,
        j: int,
        term,
        m: Marginal,
        w: WeightParams,
        horizon: float,
        X,
        V,
        time: TimeRuleSpec = TimeRuleSpec(panels=4, order=2),
        sampler: Optional[NormSampler] = None,
    ) -> BoundReport:
        """
        ∥∫_0^t T_k^{−s} 𝔠^λ_{j,k+2} T_{k+2}^s m ds∥_k ≤ C·∥m∥_{k+2} в пробных точках
        на границах панелей.
        """
        if m.order != k + 2:
            raise ValueError(f"Ожидалась функция порядка {k + 2}, получен {m.order}")
        term = Term.parse(term)
        X, V = np.asarray(X, dtype=float), np.asarray(V, dtype=float)
        rule = TimeRule(time, horizon)
        cfg = self.cfg.collision
        integrals = panel_integrals(
            rule, lambda s: CollisionImage(((term, 1.0),), j, m.transported(s), cfg).evaluate(X + s * V, V)
        )
        lhs_by_time = np.max(w.weight_k(X, V)[None, :] * np.abs(integrals), axis=1)
        p = int(np.argmax(lhs_by_time))
        lhs = float(lhs_by_time[p])
        norm = self.norms.marginal_norm(m, w, sampler or self.sampler())
        rhs = constant_C(w) * norm
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else float("inf"))
        passed = ratio <= 1.0 + HIERARCHY_BOUND_SLACK
        log = logger.info if passed else logger.error
        log(f"Оценка иерархии k={k}, j={j}, {term.name}: LHS/RHS = {ratio:.4e}")
        return BoundReport(
            lemma="apriori_hierarchy",
            samples=int(X.shape[0]),
            parameters={"k": k, "j": j, "term": term.name, "horizon": horizon, "norm": norm, "weights": w.model_dump()},
            max_ratio=ratio,
            worst_sample={"time": float(rule.edges[p]), "lhs": lhs, "rhs": rhs},
            passed=passed,
        )
