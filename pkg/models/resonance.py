import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

# Допуск на единичность σ; вызывающий код нормирует σ сам
UNIT_TOLERANCE = 1e-12
# Допуск схода с резонансного многообразия
MANIFOLD_TOLERANCE = 1e-10


def _check_unit(sigma: np.ndarray):
    norms = np.linalg.norm(sigma, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"Вектор σ должен быть единичным, отклонение нормы {worst:.3e}")


def post_collision(v, v1, sigma) -> tuple[np.ndarray, np.ndarray]:
    """
    Параметризация резонансного многообразия сферой.

    Args:
        v, v1: скорости до столкновения, массивы (..., 3)
        sigma: единичный вектор (..., 3)

    Returns:
        tuple: (v2, v3) = (v+v1)/2 ± (|v−v1|/2)σ
    """
    v = np.asarray(v, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    _check_unit(sigma)
    center = 0.5 * (v + v1)
    radius = 0.5 * np.linalg.norm(v - v1, axis=-1)[..., None]
    return center + radius * sigma, center - radius * sigma


class CollisionQuad(BaseModel):
    """Четверка скоростей на резонансном многообразии (векторизованная)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    v: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray

    @field_validator("v", "v1", "v2", "v3", mode="before")
    @classmethod
    def _as_vectors(cls, value) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        if value.shape[-1:] != (3,):
            raise ValueError(f"Ожидался массив формы (..., 3), получено {value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("Компоненты скоростей должны быть конечными")
        return value

    @classmethod
    def from_collision(cls, v, v1, sigma) -> "CollisionQuad":
        v2, v3 = post_collision(v, v1, sigma)
        v, v1 = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(v1, dtype=float))
        return cls(v=v, v1=v1, v2=v2, v3=v3)

    def scale(self) -> np.ndarray:
        return 1.0 + np.sum(self.v * self.v, axis=-1) + np.sum(self.v1 * self.v1, axis=-1)

    def momentum_residual(self) -> np.ndarray:
        return np.linalg.norm(self.v + self.v1 - self.v2 - self.v3, axis=-1) / np.sqrt(self.scale())

    def energy_residual(self) -> np.ndarray:
        energy = [np.sum(u * u, axis=-1) for u in (self.v, self.v1, self.v2, self.v3)]
        return np.abs(energy[0] + energy[1] - energy[2] - energy[3]) / self.scale()


def _unit(u: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(u, axis=-1, keepdims=True)
    return np.divide(u, norms, out=np.zeros_like(u), where=norms > 0)


def _angle_factor(quad: CollisionQuad) -> np.ndarray:
    """√(1 − (Ŵ01·Ŵ23)²); в вырожденном случае W01 = 0 косинус полагается нулем"""
    cosine = np.sum(_unit(quad.v - quad.v1) * _unit(quad.v2 - quad.v3), axis=-1)
    return np.sqrt(np.clip(1.0 - cosine * cosine, 0.0, None))


def _require_on_manifold(quad: CollisionQuad):
    momentum = float(np.max(quad.momentum_residual(), initial=0.0))
    energy = float(np.max(quad.energy_residual(), initial=0.0))
    if momentum > MANIFOLD_TOLERANCE or energy > MANIFOLD_TOLERANCE:
        raise ValueError(
            f"Четверка не лежит на резонансном многообразии: импульс {momentum:.3e}, энергия {energy:.3e}"
        )


class ManifoldReport(BaseModel):
    """Максимальные относительные невязки по набору четверок"""
    model_config = ConfigDict(frozen=True)

    count: int
    momentum: float
    energy: float
    orthogonality: float
    magnitude: float
    pythagoras: float
    product: float

    def max_residual(self) -> float:
        return max(self.momentum, self.energy, self.orthogonality, self.magnitude, self.pythagoras, self.product)


def manifold_identities(quad: CollisionQuad) -> ManifoldReport:
    """
    Максимальные относительные невязки тождеств многообразия: ортогональность
    W02·W03 = 0, |W01| = |W23|, теорема Пифагора и формула произведения.
    """
    _require_on_manifold(quad)
    w01 = np.linalg.norm(quad.v - quad.v1, axis=-1)
    w23 = np.linalg.norm(quad.v2 - quad.v3, axis=-1)
    d02 = quad.v - quad.v2
    d03 = quad.v - quad.v3
    w02 = np.linalg.norm(d02, axis=-1)
    w03 = np.linalg.norm(d03, axis=-1)
    scale = quad.scale()
    residuals = {
        "momentum": quad.momentum_residual(),
        "energy": quad.energy_residual(),
        "orthogonality": np.abs(np.sum(d02 * d03, axis=-1)) / scale,
        "magnitude": np.abs(w01 - w23) / np.sqrt(scale),
        "pythagoras": np.abs(w02**2 + w03**2 - w01**2) / scale,
        "product": np.abs(w02 * w03 - 0.5 * w01**2 * _angle_factor(quad)) / scale,
    }
    return ManifoldReport(
        count=int(w01.size),
        **{name: float(np.max(value, initial=0.0)) for name, value in residuals.items()},
    )


def min_estimate_check(quad: CollisionQuad) -> bool:
    """
    Проверка оценки min{|W02|, |W03|} ≥ (|W01|/2)·√(1 − (Ŵ01·Ŵ23)²).

    Raises:
        ValueError: если v = v1 (направления не определены) или четверка вне многообразия
    """
    _require_on_manifold(quad)
    w01 = np.linalg.norm(quad.v - quad.v1, axis=-1)
    if np.any(w01 == 0.0):
        raise ValueError("Оценка минимума не определена при v = v1")
    smallest = np.minimum(
        np.linalg.norm(quad.v - quad.v2, axis=-1), np.linalg.norm(quad.v - quad.v3, axis=-1)
    )
    bound = 0.5 * w01 * _angle_factor(quad)
    return bool(np.all(smallest >= bound - UNIT_TOLERANCE * np.maximum(1.0, w01)))
