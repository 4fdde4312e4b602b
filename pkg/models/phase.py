import logging
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import qmc

logger = logging.getLogger("workbench")

ArrayFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


def bracket(y) -> np.ndarray:
    """Японская скобка ⟨y⟩ = √(1+|y|²) по последней оси массива"""
    y = np.asarray(y, dtype=float)
    return np.sqrt(1.0 + np.sum(y * y, axis=-1))


class WeightParams(BaseModel):
    """Параметры полиномиальных весов фазового пространства и экспонента иерархии"""
    model_config = ConfigDict(frozen=True)

    p: float = 2.0  # Степень пространственного веса ⟨αx⟩^p
    q: float = 4.0  # Степень скоростного веса ⟨βv⟩^q
    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 0.0  # Экспонента e^{μk} в норме иерархии

    @field_validator("p")
    @classmethod
    def _check_p(cls, value: float) -> float:
        if not value > 1.0:
            raise ValueError(f"Показатель p должен быть больше 1, получено {value}")
        return value

    @field_validator("q")
    @classmethod
    def _check_q(cls, value: float) -> float:
        if not value > 3.0:
            raise ValueError(f"Показатель q должен быть больше 3, получено {value}")
        return value

    @field_validator("alpha", "beta")
    @classmethod
    def _check_scale(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError(f"Масштабы α и β должны быть положительны, получено {value}")
        return value

    @property
    def mu_prime(self) -> float:
        return self.mu + float(np.log(2.0))

    def weight(self, x, v) -> np.ndarray:
        """Вес ⟨αx⟩^p ⟨βv⟩^q в точках (x, v)"""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return bracket(self.alpha * x) ** self.p * bracket(self.beta * v) ** self.q

    def weight_k(self, X, V) -> np.ndarray:
        """Вес k частиц ⟨⟨αX_k⟩⟩^p ⟨⟨βV_k⟩⟩^q для массивов формы (..., k, 3)"""
        return np.prod(self.weight(X, V), axis=-1)


class GridLayout(str, Enum):
    UNIFORM = "uniform"
    CELL_CENTERED = "cell_centered"


class GridSpec(BaseModel):
    """
    Дискретизация R³×R³ тензорной сеткой. При n_x = 1 сетка однородная:
    координата x отбрасывается, поля зависят только от скорости.
    """
    model_config = ConfigDict(frozen=True)

    x_max: float = Field(..., gt=0)
    v_max: float = Field(..., gt=0)
    n_x: int = Field(..., ge=1)
    n_v: int = Field(..., ge=2)
    layout: GridLayout = GridLayout.UNIFORM

    @property
    def homogeneous(self) -> bool:
        return self.n_x == 1

    @property
    def dimension(self) -> int:
        return 3 if self.homogeneous else 6

    @property
    def shape(self) -> tuple[int, ...]:
        if self.homogeneous:
            return (self.n_v,) * 3
        return (self.n_x,) * 3 + (self.n_v,) * 3

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, half_width: float, count: int) -> np.ndarray:
        if count == 1:
            return np.zeros(1)
        if self.layout == GridLayout.UNIFORM:
            return np.linspace(-half_width, half_width, count)
        step = 2.0 * half_width / count
        return -half_width + step * (np.arange(count) + 0.5)

    def axis_weights(self, half_width: float, count: int) -> np.ndarray:
        if count == 1:
            return np.ones(1)
        if self.layout == GridLayout.UNIFORM:
            step = 2.0 * half_width / (count - 1)
            weights = np.full(count, step)
            weights[[0, -1]] = 0.5 * step
            return weights
        return np.full(count, 2.0 * half_width / count)

    @cached_property
    def x_axis(self) -> np.ndarray:
        return self.axis(self.x_max, self.n_x)

    @cached_property
    def v_axis(self) -> np.ndarray:
        return self.axis(self.v_max, self.n_v)

    def axes(self) -> list[np.ndarray]:
        if self.homogeneous:
            return [self.v_axis] * 3
        return [self.x_axis] * 3 + [self.v_axis] * 3

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Узлы сетки в порядке row-major.

        Returns:
            tuple: массивы X и V формы (N, 3); в однородном режиме X ≡ 0
        """
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        if self.homogeneous:
            return np.zeros_like(points), points
        return points[:, :3].copy(), points[:, 3:].copy()

    def quadrature_weights(self) -> np.ndarray:
        """Веса кубатуры по узлам: трапеции для uniform, середины для cell_centered"""
        wx = self.axis_weights(self.x_max, self.n_x)
        wv = self.axis_weights(self.v_max, self.n_v)
        factors = [wv] * 3 if self.homogeneous else [wx] * 3 + [wv] * 3
        weights = factors[0]
        for factor in factors[1:]:
            weights = np.multiply.outer(weights, factor)
        return weights.ravel()

    @classmethod
    def from_tail_tolerance(
        cls,
        w: WeightParams,
        n_x: int,
        n_v: int,
        tolerance: float = 1e-6,
        layout: GridLayout = GridLayout.UNIFORM,
    ) -> "GridSpec":
        """Полуширины, при которых ⟨βV_max⟩^{-q} и ⟨αX_max⟩^{-p} не превосходят tolerance"""
        if not 0.0 < tolerance < 1.0:
            raise ValueError(f"Допуск хвоста должен лежать в (0, 1), получено {tolerance}")
        v_max = np.sqrt(tolerance ** (-2.0 / w.q) - 1.0) / w.beta
        x_max = np.sqrt(tolerance ** (-2.0 / w.p) - 1.0) / w.alpha
        return cls(x_max=float(x_max), v_max=float(v_max), n_x=n_x, n_v=n_v, layout=layout)

    def tail_bound(self, w: WeightParams) -> float:
        """Оценка отброшенного хвоста: ⟨βV_max⟩^{-q}, для неоднородной сетки еще и ⟨αX_max⟩^{-p}"""
        tail = float(bracket(np.array([w.beta * self.v_max])) ** (-w.q))
        if not self.homogeneous:
            tail = max(tail, float(bracket(np.array([w.alpha * self.x_max])) ** (-w.p)))
        return tail


class DistributionField:
    """Скалярная функция f(x, v) на R³×R³ с векторизованным вычислением"""
    description: str = "field"

    def evaluate(self, x, v) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x, v) -> np.ndarray:
        return self.evaluate(x, v)

    def transported(self, s: float) -> "DistributionField":
        return FormulaField(self.evaluate, shift=s, description=f"T^{s:g}[{self.description}]")

    def __add__(self, other: "DistributionField") -> "SumField":
        return SumField(((1.0, self), (1.0, other)))

    def __sub__(self, other: "DistributionField") -> "SumField":
        return SumField(((1.0, self), (-1.0, other)))

    def __mul__(self, factor: float) -> "SumField":
        return SumField(((float(factor), self),))

    __rmul__ = __mul__

    def __neg__(self) -> "SumField":
        return SumField(((-1.0, self),))


def _as_field_values(values, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], v.shape[:-1])
    if values.shape != shape:
        values = np.broadcast_to(values, shape)
    return values


class FormulaField(DistributionField):
    """
    Поле, заданное формулой. Перенос накапливает сдвиг s, поэтому
    T^t T^s f и T^{s+t} f вычисляются одной и той же формулой.
    """

    def __init__(self, func: ArrayFunc, shift: float = 0.0, description: str = "formula"):
        self.func = func
        self.shift = float(shift)
        self.description = description

    def evaluate(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.shift != 0.0:
            x = x - self.shift * v
        return _as_field_values(self.func(x, v), x, v)

    def transported(self, s: float) -> "FormulaField":
        return FormulaField(self.func, shift=self.shift + s, description=self.description)


class ZeroField(DistributionField):
    description = "zero"

    def evaluate(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.zeros(np.broadcast_shapes(x.shape[:-1], v.shape[:-1]))

    def transported(self, s: float) -> "ZeroField":
        return self


class SumField(DistributionField):
    """Линейная комбинация полей Σ c_i f_i"""

    def __init__(self, terms: Sequence[tuple[float, DistributionField]]):
        self.terms = tuple((float(c), f) for c, f in terms)
        self.description = " + ".join(f"{c:g}·{f.description}" for c, f in self.terms)

    def evaluate(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        total = np.zeros(np.broadcast_shapes(x.shape[:-1], v.shape[:-1]))
        for coefficient, field in self.terms:
            total = total + coefficient * field.evaluate(x, v)
        return total

    def transported(self, s: float) -> "SumField":
        return SumField(tuple((c, f.transported(s)) for c, f in self.terms))


class GridField(DistributionField):
    """
    Поле на сетке GridSpec с мультилинейной интерполяцией; вне ящика равно нулю.
    """

    def __init__(self, grid: GridSpec, values, description: str = "grid"):
        values = np.asarray(values, dtype=float).reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("Значения сеточного поля должны быть конечными")
        values = values.copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values
        self.description = description

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            self.grid.axes(), self.values, method="linear", bounds_error=False, fill_value=0.0
        )

    def evaluate(self, x, v) -> np.ndarray:
        x, v = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
        points = v if self.grid.homogeneous else np.concatenate([x, v], axis=-1)
        flat = points.reshape(-1, self.grid.dimension)
        return self._interpolator(flat).reshape(points.shape[:-1])

    def node_values(self) -> np.ndarray:
        return self.values.ravel()

    def __mul__(self, factor: float) -> "GridField":
        return GridField(self.grid, factor * self.values, description=self.description)

    __rmul__ = __mul__


def transport(f: DistributionField, s: float) -> DistributionField:
    """Свободный перенос (T^s f)(x, v) = f(x − s·v, v)"""
    return f.transported(s)


def interpolate(f: GridField, x, v) -> np.ndarray:
    """Мультилинейная интерполяция сеточного поля; вне ящика возвращает 0"""
    return f.evaluate(x, v)


def sample_field(f: DistributionField, grid: GridSpec, description: Optional[str] = None) -> GridField:
    X, V = grid.nodes()
    return GridField(grid, f.evaluate(X, V), description=description or f.description)


def equilibrium_field(w: WeightParams, drift=(0.0, 0.0, 0.0), homogeneous: bool = False) -> FormulaField:
    """
    Равновесие типа Рэлея-Джинса: 1/f = ⟨αx⟩^p (1 + c·v + |v|²).
    При малом |c| знаменатель положителен.
    """
    drift = np.asarray(drift, dtype=float)

    def func(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        profile = 1.0 / (1.0 + v @ drift + np.sum(v * v, axis=-1))
        if homogeneous:
            return profile
        return bracket(w.alpha * x) ** (-w.p) * profile

    return FormulaField(func, description="equilibrium")


def gaussian_field(
    amplitude: float = 1.0,
    x_center=(0.0, 0.0, 0.0),
    x_width: float = 1.0,
    v_center=(0.0, 0.0, 0.0),
    v_width: float = 1.0,
    homogeneous: bool = False,
) -> FormulaField:
    """Гауссово поле A·exp(−|x−x₀|²/2s_x² − |v−u|²/2s_v²)"""
    x_center = np.asarray(x_center, dtype=float)
    v_center = np.asarray(v_center, dtype=float)

    def func(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        dv = v - v_center
        exponent = -np.sum(dv * dv, axis=-1) / (2.0 * v_width**2)
        if not homogeneous:
            dx = x - x_center
            exponent = exponent - np.sum(dx * dx, axis=-1) / (2.0 * x_width**2)
        return amplitude * np.exp(exponent)

    return FormulaField(func, description=f"gaussian(A={amplitude:g})")


def weight_profile_field(w: WeightParams) -> FormulaField:
    """Поле ⟨αx⟩^{-p} ⟨βv⟩^{-q}, на котором норма равна единице"""

    def func(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return 1.0 / w.weight(x, v)

    return FormulaField(func, description="weight^-1")


class NormSampler(BaseModel):
    """
    Набор точек для оценки sup-нормы: узлы сетки плюс квазислучайное
    уточнение (scrambled Halton) в ящике сетки.
    """
    model_config = ConfigDict(frozen=True)

    grid: Optional[GridSpec] = None
    n_random: int = Field(0, ge=0)
    seed: int = 0
    x_max: Optional[float] = None
    v_max: Optional[float] = None
    homogeneous: bool = False

    @property
    def box(self) -> tuple[float, float]:
        x_max = self.x_max if self.x_max is not None else (self.grid.x_max if self.grid else 1.0)
        v_max = self.v_max if self.v_max is not None else (self.grid.v_max if self.grid else 1.0)
        return float(x_max), float(v_max)

    @property
    def is_homogeneous(self) -> bool:
        return self.homogeneous or (self.grid is not None and self.grid.homogeneous)

    def random_points(self, count: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        count = self.n_random if count is None else count
        x_max, v_max = self.box
        dimension = 3 if self.is_homogeneous else 6
        unit = qmc.Halton(d=dimension, scramble=True, seed=self.seed).random(count)
        unit = 2.0 * unit - 1.0
        if self.is_homogeneous:
            return np.zeros((count, 3)), v_max * unit
        return x_max * unit[:, :3], v_max * unit[:, 3:]

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Все точки выборки.

        Returns:
            tuple: массивы X и V формы (N, 3)

        Raises:
            ValueError: если выборка пуста
        """
        chunks_x, chunks_v = [], []
        if self.grid is not None:
            X, V = self.grid.nodes()
            chunks_x.append(X)
            chunks_v.append(V)
        if self.n_random > 0:
            X, V = self.random_points()
            chunks_x.append(X)
            chunks_v.append(V)
        if not chunks_x:
            raise ValueError("Пустой набор точек для оценки нормы")
        return np.concatenate(chunks_x), np.concatenate(chunks_v)

    def particle_points(self, k: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Квазислучайные пробные точки k частиц формы (count, k, 3)"""
        x_max, v_max = self.box
        unit = qmc.Halton(d=6 * k, scramble=True, seed=self.seed).random(count)
        unit = (2.0 * unit - 1.0).reshape(count, k, 6)
        X = x_max * unit[..., :3]
        if self.is_homogeneous:
            X = np.zeros_like(X)
        return X, v_max * unit[..., 3:]
