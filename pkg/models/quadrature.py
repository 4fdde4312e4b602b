import logging
from enum import Enum
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import roots_jacobi, roots_legendre

logger = logging.getLogger("workbench")

FOUR_PI = 4.0 * np.pi


def _symmetric_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Узлы Гаусса-Лежандра, симметризованные так, что x[::-1] == -x побитово"""
    x, w = roots_legendre(n)
    return 0.5 * (x - x[::-1]), 0.5 * (w + w[::-1])


class QuadratureRule:
    """Базовое правило: узлы, веса и оценка погрешности по двум разрешениям"""
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        values = np.asarray(g(self.nodes), dtype=float)
        return float(np.sum(self.weights * values))

    def refined(self) -> "QuadratureRule":
        raise NotImplementedError

    def error_estimate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        return abs(self.integrate(g) - self.refined().integrate(g))


class SphereKernel(str, Enum):
    UNIFORM = "uniform"
    # Вес 1/√(1−(ω·σ)²) вокруг оси правила: узлы Чебышева по cos θ
    INVERSE_SINE = "inverse_sine"


class SphereRuleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_theta: int = Field(8, ge=1)
    n_phi: int = Field(16, ge=1)
    kernel: SphereKernel = SphereKernel.UNIFORM


class SphereRule(QuadratureRule):
    """
    Произведение правила по cos θ на равномерное правило по φ. При четном
    n_phi набор узлов замкнут относительно σ → −σ; антиподальная
    перестановка узлов строится и проверяется при создании правила.
    """

    def __init__(self, spec: SphereRuleSpec):
        self.spec = spec
        n, m = spec.n_theta, spec.n_phi
        if spec.kernel == SphereKernel.UNIFORM:
            u, wu = _symmetric_legendre(n)
        else:
            u = np.cos((2.0 * np.arange(1, n + 1) - 1.0) * np.pi / (2.0 * n))
            u = 0.5 * (u - u[::-1])
            wu = np.full(n, np.pi / n)

        if m % 2 == 0:
            half = np.arange(m // 2) * (2.0 * np.pi / m)
            cos_phi = np.concatenate([np.cos(half), -np.cos(half)])
            sin_phi = np.concatenate([np.sin(half), -np.sin(half)])
        else:
            angles = np.arange(m) * (2.0 * np.pi / m)
            cos_phi, sin_phi = np.cos(angles), np.sin(angles)

        sin_theta = np.sqrt(1.0 - u * u)
        nodes = np.stack(
            [
                np.multiply.outer(sin_theta, cos_phi),
                np.multiply.outer(sin_theta, sin_phi),
                np.multiply.outer(u, np.ones(m)),
            ],
            axis=-1,
        )
        weights = np.multiply.outer(wu, np.full(m, 2.0 * np.pi / m))
        self.nodes = nodes.reshape(-1, 3)
        self.weights = weights.ravel()
        self.antipode = self._antipodal_map(n, m)
        self.antipodal = self.antipode is not None

    def _antipodal_map(self, n: int, m: int) -> Optional[np.ndarray]:
        if m % 2:
            return None
        rows = n - 1 - np.arange(n)[:, None]
        cols = (np.arange(m)[None, :] + m // 2) % m
        index = (rows * m + cols).ravel()
        if not (np.array_equal(self.nodes[index], -self.nodes) and np.array_equal(self.weights[index], self.weights)):
            raise ValueError("Антиподальная симметрия сферического правила не подтверждена")
        return index

    @property
    def total_weight(self) -> float:
        return FOUR_PI if self.spec.kernel == SphereKernel.UNIFORM else 2.0 * np.pi**2

    def aligned(self, axes: np.ndarray) -> np.ndarray:
        """
        Узлы, повернутые так, что полюс правила совпадает с каждой осью.

        Args:
            axes: единичные векторы формы (K, 3)

        Returns:
            np.ndarray: узлы формы (K, N, 3)
        """
        axes = np.asarray(axes, dtype=float)
        helper = np.where(np.abs(axes[:, :1]) > 0.9, [[0.0, 1.0, 0.0]], [[1.0, 0.0, 0.0]])
        e1 = helper - np.sum(helper * axes, axis=-1, keepdims=True) * axes
        e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
        e2 = np.cross(axes, e1)
        frame = np.stack([e1, e2, axes], axis=1)  # (K, 3, 3)
        return np.einsum("nj,kjd->knd", self.nodes, frame)

    def refined(self) -> "SphereRule":
        return build_sphere_rule(
            SphereRuleSpec(n_theta=2 * self.spec.n_theta, n_phi=2 * self.spec.n_phi, kernel=self.spec.kernel)
        )


class BoxRuleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = Field(12, ge=1)
    v_max: float = Field(4.0, gt=0)


class BoxRule(QuadratureRule):
    """Тензорное правило Гаусса-Лежандра n³ на [−V, V]³, точное до степени 2n−1"""

    def __init__(self, spec: BoxRuleSpec):
        self.spec = spec
        x, w = _symmetric_legendre(spec.n)
        self.axis_nodes = spec.v_max * x
        self.axis_weights = spec.v_max * w
        mesh = np.meshgrid(self.axis_nodes, self.axis_nodes, self.axis_nodes, indexing="ij")
        self.nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        weights = np.multiply.outer(np.multiply.outer(self.axis_weights, self.axis_weights), self.axis_weights)
        self.weights = weights.ravel()

    @property
    def degree(self) -> int:
        return 2 * self.spec.n - 1

    def refined(self) -> "BoxRule":
        return build_box_rule(BoxRuleSpec(n=2 * self.spec.n, v_max=self.spec.v_max))


class TimeRuleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    panels: int = Field(8, ge=1)
    order: int = Field(4, ge=1)


class TimeRule(QuadratureRule):
    """
    Составное правило Гаусса-Лежандра на [0, t]. Хранит границы панелей
    и номер панели каждого узла; при t = 0 все веса нулевые.
    """

    def __init__(self, spec: TimeRuleSpec, t: float):
        if t < 0:
            raise ValueError(f"Длина интервала времени должна быть неотрицательной, получено {t}")
        self.spec = spec
        self.t = float(t)
        x, w = _symmetric_legendre(spec.order)
        self.edges = np.linspace(0.0, self.t, spec.panels + 1)
        left, right = self.edges[:-1], self.edges[1:]
        half = 0.5 * (right - left)
        self.nodes = (0.5 * (left + right)[:, None] + half[:, None] * x[None, :]).ravel()
        self.weights = (half[:, None] * w[None, :]).ravel()
        self.panel = np.repeat(np.arange(spec.panels), spec.order)

    def refined(self) -> "TimeRule":
        return TimeRule(TimeRuleSpec(panels=2 * self.spec.panels, order=self.spec.order), self.t)


class LineRule(QuadratureRule):
    """
    Правило для несобственных интегралов с алгебраическим убыванием:
    замена s = c + a·tg θ. При ненулевых степенях концов используется
    одна панель Гаусса-Якоби с весом (1−x)^{a_high}(1+x)^{a_low}.
    """

    def __init__(
        self,
        n: int = 48,
        center: float = 0.0,
        scale: float = 1.0,
        lower: float = -np.inf,
        upper: float = np.inf,
        panels: int = 1,
        powers: tuple[float, float] = (0.0, 0.0),
    ):
        if scale <= 0:
            raise ValueError(f"Масштаб замены должен быть положительным, получено {scale}")
        if upper <= lower:
            raise ValueError(f"Пустой интервал интегрирования [{lower}, {upper}]")
        self.n, self.center, self.scale = n, float(center), float(scale)
        self.lower, self.upper, self.panels, self.powers = lower, upper, panels, tuple(powers)
        theta_low = np.arctan((lower - center) / scale)
        theta_high = np.arctan((upper - center) / scale)
        a_low, a_high = self.powers

        if a_low != 0.0 or a_high != 0.0:
            x, w = roots_jacobi(n, a_high, a_low)
            w = w / ((1.0 - x) ** a_high * (1.0 + x) ** a_low)
            half = 0.5 * (theta_high - theta_low)
            theta = theta_low + half * (x + 1.0)
            w = w * half
        else:
            x, w = roots_legendre(n)
            edges = np.linspace(theta_low, theta_high, panels + 1)
            half = 0.5 * np.diff(edges)
            theta = (0.5 * (edges[:-1] + edges[1:])[:, None] + half[:, None] * x[None, :]).ravel()
            w = (half[:, None] * w[None, :]).ravel()

        cos_theta = np.cos(theta)
        self.nodes = self.center + self.scale * np.tan(theta)
        self.weights = w * self.scale / (cos_theta * cos_theta)

    def refined(self) -> "LineRule":
        return LineRule(
            n=2 * self.n,
            center=self.center,
            scale=self.scale,
            lower=self.lower,
            upper=self.upper,
            panels=self.panels,
            powers=self.powers,
        )


@lru_cache(maxsize=32)
def build_sphere_rule(spec: SphereRuleSpec) -> SphereRule:
    rule = SphereRule(spec)
    logger.debug(f"Сферическое правило {spec.n_theta}x{spec.n_phi} ({spec.kernel.value}), антиподально: {rule.antipodal}")
    return rule


@lru_cache(maxsize=32)
def build_box_rule(spec: BoxRuleSpec) -> BoxRule:
    return BoxRule(spec)


def integrate_sphere(rule: SphereRule, g: Callable[[np.ndarray], np.ndarray]) -> float:
    return rule.integrate(g)


def integrate_velocity_box(rule: BoxRule, g: Callable[[np.ndarray], np.ndarray]) -> float:
    return rule.integrate(g)


def integrate_time(rule: TimeRule, g: Callable[[np.ndarray], np.ndarray]) -> float:
    return rule.integrate(g)


def integrate_line(rule: LineRule, g: Callable[[np.ndarray], np.ndarray]) -> float:
    return rule.integrate(g)
