import configparser
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, TypeVar

import numpy as np
from pydantic import BaseModel, BeforeValidator, Field, ValidationError, model_validator

from config.settings import settings
from models.collision import CollisionConfig
from models.constants import constant_C, contraction_threshold
from models.errors import ConfigurationError
from models.phase import GridSpec, WeightParams, bracket
from models.quadrature import BoxRuleSpec, SphereKernel, SphereRuleSpec, TimeRuleSpec
from models.solver import SolverConfig


def _split_list(value):
    """Списки в INI записываются через запятую"""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


# Относительный запас на округление при выводе полуширин из допуска
TAIL_SLACK = 1e-9

T = TypeVar("T")
CommaList = Annotated[list[T], BeforeValidator(_split_list)]


class RunSection(BaseModel):
    seed: int = settings.SEED
    output_dir: str = settings.OUTPUT_DIR
    workers: int = Field(settings.WORKERS, ge=1)
    log_level: str = settings.LOG_LEVEL
    # Допуск ⟨βV_max⟩^{-q} для сетки [grid]; незаданные полуширины выводятся из него
    tail_tolerance: float = Field(settings.TAIL_TOLERANCE, gt=0, lt=1)


class QuadratureSection(BaseModel):
    """Разрешения квадратур: ящик по v1, сфера по σ, составное правило по времени"""
    box_n: int = Field(12, ge=1)
    box_v_max: float = Field(4.0, gt=0)
    sphere_n_theta: int = Field(4, ge=1)
    sphere_n_phi: int = Field(8, ge=1)
    time_panels: int = Field(8, ge=1)
    time_order: int = Field(2, ge=1)
    # Грубые правила для вложенных образов (итерированная оценка, инвариантность)
    coarse_box_n: int = Field(4, ge=1)
    coarse_sphere_n_theta: int = Field(2, ge=1)
    coarse_sphere_n_phi: int = Field(4, ge=1)

    def collision(self) -> CollisionConfig:
        return CollisionConfig(
            box=BoxRuleSpec(n=self.box_n, v_max=self.box_v_max),
            sphere=SphereRuleSpec(n_theta=self.sphere_n_theta, n_phi=self.sphere_n_phi),
        )

    def time(self) -> TimeRuleSpec:
        return TimeRuleSpec(panels=self.time_panels, order=self.time_order)

    def coarse_collision(self) -> CollisionConfig:
        return CollisionConfig(
            box=BoxRuleSpec(n=self.coarse_box_n, v_max=self.box_v_max),
            sphere=SphereRuleSpec(n_theta=self.coarse_sphere_n_theta, n_phi=self.coarse_sphere_n_phi),
        )


class SolverSection(BaseModel):
    horizon: float = Field(1.0, gt=0)
    # Радиус шара M; по умолчанию 0.9·(24C)^{-1/2}
    radius: Optional[float] = Field(None, gt=0)
    max_iterations: int = Field(30, ge=1)
    tolerance: float = Field(1e-10, gt=0)
    enforce_regime: bool = True
    norm_samples: int = Field(settings.NORM_SAMPLES, ge=0)
    initial: Literal["gaussian", "equilibrium", "zero"] = "gaussian"
    # Начальные данные масштабируются до ∥f0∥ = data_fraction·M
    data_fraction: float = Field(0.5, gt=0)
    x_width: float = Field(1.0, gt=0)
    v_width: float = Field(1.0, gt=0)
    # g0 = (1 − perturbation)·f0 для сравнения устойчивости; 0 отключает сравнение
    perturbation: float = Field(0.0, ge=0, lt=1)
    checkpoints: bool = True


class CollisionEvalSection(BaseModel):
    terms: CommaList[str] = ["L0", "L1", "L2", "L3", "C"]
    probes: int = Field(8, ge=1)
    oracle_samples: int = Field(0, ge=0)


class VerifySection(BaseModel):
    lemma: str = "all"
    samples: int = Field(1000, ge=1)
    qs: CommaList[float] = [3.5, 4.0, 6.0]
    deltas: CommaList[float] = [-2.0, -1.0, 0.0]


class BoardGameSection(BaseModel):
    k: int = Field(2, ge=1)
    n: int = Field(2, ge=2)
    mu: Optional[CommaList[int]] = None
    t: float = Field(1.0, gt=0)
    order: int = Field(2, ge=1)
    probes: int = Field(8, ge=1)
    labeled: bool = False


class HierarchySection(BaseModel):
    """Собственная настольная постановка иерархии: слабый пространственный вес и грубая сетка"""
    mixture: Optional[str] = None
    # Экспонента μ; по умолчанию ½·ln(32C) + mu_margin
    mu: Optional[float] = None
    mu_margin: float = Field(0.01, gt=0)
    alpha: float = Field(0.1, gt=0)
    x_max: float = Field(3.0, gt=0)
    v_max: float = Field(3.0, gt=0)
    n_x: int = Field(2, ge=1)
    n_v: int = Field(3, ge=2)
    k: int = Field(1, ge=1)
    k_max: int = Field(3, ge=1)
    levels: int = Field(3, ge=2)
    probes: int = Field(64, ge=1)
    probe_mode: Literal["grid", "random"] = "grid"
    residual_levels: int = Field(1, ge=0)


class RunConfig(BaseModel):
    """Конфигурация запуска: все физические параметры заданы явно и попадают в отчет"""
    run: RunSection = RunSection()
    weights: WeightParams = WeightParams()
    # Полуширины, не заданные явно, выводятся из run.tail_tolerance
    grid: GridSpec
    quadrature: QuadratureSection = QuadratureSection()
    solver: SolverSection = SolverSection()
    collision: CollisionEvalSection = CollisionEvalSection()
    verify: VerifySection = VerifySection()
    boardgame: BoardGameSection = BoardGameSection()
    hierarchy: HierarchySection = HierarchySection()

    @model_validator(mode="before")
    @classmethod
    def derive_grid(cls, data):
        if not isinstance(data, dict) or isinstance(data.get("grid"), GridSpec):
            return data
        grid = dict(data.get("grid") or {})
        if "x_max" in grid and "v_max" in grid:
            return data
        try:
            weights = WeightParams.model_validate(data.get("weights") or {})
            tolerance = RunSection.model_validate(data.get("run") or {}).tail_tolerance
            derived = GridSpec.from_tail_tolerance(
                weights, int(grid.get("n_x", 1)), int(grid.get("n_v", 8)), tolerance
            )
        except (ValidationError, ValueError):
            # Ошибку сообщит обычная валидация секций
            return data
        grid.setdefault("x_max", derived.x_max)
        grid.setdefault("v_max", derived.v_max)
        return {**data, "grid": grid}

    @model_validator(mode="after")
    def check_tail(self) -> "RunConfig":
        tail = self.grid.tail_bound(self.weights)
        if tail > self.run.tail_tolerance * (1.0 + TAIL_SLACK):
            raise ValueError(
                f"Хвост сетки {tail:.3e} больше допуска {self.run.tail_tolerance:.1e}: "
                f"увеличьте v_max (и x_max) или уберите их, чтобы вывести из допуска"
            )
        return self

    def tail_bounds(self) -> dict[str, float]:
        """Оценки отброшенных хвостов сетки [grid] и ящика квадратуры по v1"""
        box = bracket(np.array([self.weights.beta * self.quadrature.box_v_max])) ** (-self.weights.q)
        return {"grid": self.grid.tail_bound(self.weights), "box": float(box)}

    @classmethod
    def from_config(cls, config_path) -> "RunConfig":
        """
        Загрузка конфигурации из INI (основной формат) или JSON с той же структурой.

        Raises:
            ConfigurationError: если файл не читается или значения нарушают инварианты
        """
        path = Path(config_path)
        try:
            if path.suffix == ".json":
                with open(path, encoding="utf-8") as f:
                    data = json.load(f)
            else:
                parser = configparser.ConfigParser()
                if not parser.read(path, encoding="utf-8"):
                    raise ConfigurationError(f"Файл конфигурации не найден: {path}")
                data = {section: dict(parser[section]) for section in parser.sections()}
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"Некорректная конфигурация {path}: {e}", {"path": str(path)})
        except (OSError, configparser.Error, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Не удалось прочитать конфигурацию {path}: {e}", {"path": str(path)})

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out: Optional[str] = None,
        workers: Optional[int] = None,
        sequential: bool = False,
    ) -> "RunConfig":
        """Флаги командной строки имеют приоритет над файлом"""
        run = self.run.model_copy(
            update={
                key: value
                for key, value in {
                    "seed": seed,
                    "output_dir": out,
                    "workers": 1 if sequential else workers,
                }.items()
                if value is not None
            }
        )
        return self.model_copy(update={"run": run})

    def radius(self) -> float:
        if self.solver.radius is not None:
            return self.solver.radius
        return 0.9 * contraction_threshold(self.weights)

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig(
                weights=self.weights,
                grid=self.grid,
                collision=self.quadrature.collision(),
                time=self.quadrature.time(),
                horizon=self.solver.horizon,
                radius=self.radius(),
                max_iterations=self.solver.max_iterations,
                tolerance=self.solver.tolerance,
                enforce_regime=self.solver.enforce_regime,
                norm_samples=self.solver.norm_samples,
                seed=self.run.seed,
            )
        except ValidationError as e:
            raise ConfigurationError(f"Некорректные параметры решателя: {e}")

    def hierarchy_weights(self) -> WeightParams:
        h = self.hierarchy
        base = self.weights.model_copy(update={"alpha": h.alpha, "mu": 0.0})
        mu = h.mu if h.mu is not None else 0.5 * float(np.log(32.0 * constant_C(base))) + h.mu_margin
        return WeightParams(p=base.p, q=base.q, alpha=h.alpha, beta=base.beta, mu=mu)

    def hierarchy_solver_config(self) -> SolverConfig:
        h = self.hierarchy
        w = self.hierarchy_weights()
        try:
            return SolverConfig(
                weights=w,
                grid=GridSpec(x_max=h.x_max, v_max=h.v_max, n_x=h.n_x, n_v=h.n_v),
                collision=self.quadrature.coarse_collision(),
                time=self.quadrature.time(),
                horizon=self.solver.horizon,
                radius=float(np.exp(-w.mu)),
                max_iterations=self.solver.max_iterations,
                tolerance=self.solver.tolerance,
                norm_samples=0,
                seed=self.run.seed,
            )
        except ValidationError as e:
            raise ConfigurationError(f"Некорректные параметры иерархии: {e}")

    def velocity_sphere(self) -> SphereRuleSpec:
        return SphereRuleSpec(
            n_theta=self.quadrature.sphere_n_theta,
            n_phi=self.quadrature.sphere_n_phi,
            kernel=SphereKernel.INVERSE_SINE,
        )


def load_run_config(config_path: Optional[str] = None) -> RunConfig:
    path = Path(config_path or settings.RUN_CONFIG_PATH)
    if config_path is None and not path.exists():
        return RunConfig()
    return RunConfig.from_config(path)
