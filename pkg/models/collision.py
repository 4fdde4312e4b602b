from enum import Enum, IntEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config.settings import settings
from models.phase import DistributionField
from models.quadrature import BoxRule, BoxRuleSpec, SphereRule, SphereRuleSpec, build_box_rule, build_sphere_rule
from models.resonance import post_collision


class Term(IntEnum):
    """Слагаемые L_0..L_3; L_0, L_1 образуют приход, L_2, L_3 уход"""
    L0 = 0
    L1 = 1
    L2 = 2
    L3 = 3

    @classmethod
    def parse(cls, value) -> "Term":
        if isinstance(value, str):
            name = value.upper()
            if name in cls.__members__:
                return cls[name]
        try:
            return cls(int(value))
        except (TypeError, ValueError):
            raise ValueError(f"Неизвестное слагаемое столкновений: {value!r}, ожидалось 0..3")

    @property
    def sign(self) -> float:
        return 1.0 if self in (Term.L0, Term.L1) else -1.0


class Frame(str, Enum):
    LAB = "lab"
    # Множитель в скорости w читается в точке x + s(v − w)
    TRANSPORTED = "transported"


class CollisionConfig(BaseModel):
    """Квадратуры и система отсчета для оператора столкновений"""
    model_config = ConfigDict(frozen=True)

    box: BoxRuleSpec = BoxRuleSpec()
    sphere: SphereRuleSpec = SphereRuleSpec()
    frame: Frame = Frame.LAB
    chunk_budget: int = Field(default_factory=lambda: settings.CHUNK_BUDGET, gt=0)

    @property
    def box_rule(self) -> BoxRule:
        return build_box_rule(self.box)

    @property
    def sphere_rule(self) -> SphereRule:
        return build_sphere_rule(self.sphere)

    def chunk_size(self) -> int:
        per_point = 3 * self.box_rule.nodes.shape[0] * self.sphere_rule.nodes.shape[0]
        return max(1, self.chunk_budget // per_point)

    def transported(self) -> "CollisionConfig":
        return self.model_copy(update={"frame": Frame.TRANSPORTED})


class CollisionStencil:
    """
    Узлы интеграла столкновений для блока выходных точек (x, v):
    v1 из BoxRule, (v2, v3) из параметризации сферой. Формы массивов:
    v (C,1,1,3), v1 (C,M,1,3), v2 и v3 (C,M,S,3).
    """

    def __init__(self, x: np.ndarray, v: np.ndarray, cfg: CollisionConfig, shift: float = 0.0):
        if shift != 0.0 and cfg.frame != Frame.TRANSPORTED:
            raise ValueError("Сдвиг по времени допустим только в переносимой системе отсчета")
        box, sphere = cfg.box_rule, cfg.sphere_rule
        self.shift = float(shift)
        self.x = np.asarray(x, dtype=float)[:, None, None, :]
        self.v = np.asarray(v, dtype=float)[:, None, None, :]
        self.v1 = box.nodes[None, :, None, :]
        self.v2, self.v3 = post_collision(self.v, self.v1, sphere.nodes[None, None, :, :])
        self.v1 = np.broadcast_to(self.v1, self.v2.shape[:2] + (1, 3))
        gap = np.linalg.norm(self.v - self.v1, axis=-1)[..., 0]
        # Ядро 2^{-3}|v−v1| с весами v1; веса σ применяются отдельно
        self.kernel = 0.125 * gap * box.weights[None, :]
        self.sphere_weights = sphere.weights

    def read(self, field: DistributionField, w: np.ndarray) -> np.ndarray:
        if self.shift == 0.0:
            return field.evaluate(self.x, w)
        return field.evaluate(self.x + self.shift * (self.v - w), w)

    def reduce(self, values: np.ndarray) -> np.ndarray:
        """Σ_M ядро · Σ_S w_σ · values; явные суммы по осям фиксируют порядок сложения"""
        inner = np.sum(values * self.sphere_weights, axis=-1)
        return np.sum(inner * self.kernel, axis=-1)

    def pattern(self, term: Term, g: DistributionField, h: DistributionField, l: DistributionField) -> np.ndarray:
        """Произведение трех полей в аргументах слагаемого L_j"""
        if term == Term.L0:
            return self.read(g, self.v1) * self.read(h, self.v2) * self.read(l, self.v3)
        if term == Term.L1:
            return self.read(g, self.v) * self.read(h, self.v2) * self.read(l, self.v3)
        if term == Term.L2:
            return self.read(g, self.v) * self.read(h, self.v1) * self.read(l, self.v3)
        return self.read(g, self.v) * self.read(h, self.v1) * self.read(l, self.v2)

    def factors(self, f: DistributionField) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.read(f, self.v), self.read(f, self.v1), self.read(f, self.v2), self.read(f, self.v3)


def gain_loss_products(f0, f1, f2, f3) -> tuple[np.ndarray, np.ndarray]:
    """Приход f1f2f3 + f f2f3 и уход f f1f3 + f f1f2 в одних и тех же значениях"""
    gain = f1 * f2 * f3 + f0 * f2 * f3
    loss = f0 * f1 * f3 + f0 * f1 * f2
    return gain, loss
