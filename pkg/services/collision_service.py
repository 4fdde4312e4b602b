import logging
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from models.collision import CollisionConfig, CollisionStencil, Term, gain_loss_products
from models.phase import DistributionField, GridField, GridSpec
from models.quadrature import BoxRuleSpec, build_box_rule
from runtime.pool import WorkerPool

logger = logging.getLogger("workbench")

TestFunction = Callable[[np.ndarray], np.ndarray]


class MomentStudyRow(BaseModel):
    n: int
    strong: float
    weak: float
    error: float
    reduction: Optional[float] = None


class CollisionService:
    """
    Оператор столкновений C[f] = L_0 + L_1 − L_2 − L_3 через точную
    параметризацию резонансного многообразия.
    """

    def __init__(self, cfg: CollisionConfig, pool: WorkerPool):
        self.cfg = cfg
        self.pool = pool

    def _batched(self, x, v, compute: Callable[[CollisionStencil], np.ndarray], shift: float = 0.0) -> np.ndarray:
        """Вычисление по блокам выходных точек; блоки не зависят от числа потоков"""
        x, v = np.broadcast_arrays(np.atleast_2d(np.asarray(x, dtype=float)), np.atleast_2d(np.asarray(v, dtype=float)))
        shape = x.shape[:-1]
        x = x.reshape(-1, 3)
        v = v.reshape(-1, 3)
        blocks = self.pool.chunks(x.shape[0], self.cfg.chunk_size())

        def run(block: slice) -> np.ndarray:
            return compute(CollisionStencil(x[block], v[block], self.cfg, shift))

        parts = self.pool.map(run, blocks)
        values = np.concatenate(parts) if parts else np.zeros(0)
        return values.reshape(shape)

    def eval_L(
        self,
        j,
        g: DistributionField,
        h: DistributionField,
        l: DistributionField,
        x,
        v,
        shift: float = 0.0,
    ) -> np.ndarray:
        """
        Слагаемое L_j(g, h, l) в точках (x, v).

        Args:
            j: номер слагаемого 0..3
            g, h, l: поля-аргументы
            x, v: точки формы (3,) или (N, 3)
            shift: сдвиг s в переносимой системе отсчета

        Returns:
            np.ndarray: значения формы (N,)
        """
        term = Term.parse(j)
        return self._batched(x, v, lambda st: st.reduce(st.pattern(term, g, h, l)), shift)

    def eval_C(self, f: DistributionField, x, v, shift: float = 0.0) -> np.ndarray:
        def compute(st: CollisionStencil) -> np.ndarray:
            gain, loss = gain_loss_products(*st.factors(f))
            return st.reduce(gain - loss)

        return self._batched(x, v, compute, shift)

    def gain(self, f: DistributionField, x, v, shift: float = 0.0) -> np.ndarray:
        return self._batched(x, v, lambda st: st.reduce(gain_loss_products(*st.factors(f))[0]), shift)

    def loss(self, f: DistributionField, x, v, shift: float = 0.0) -> np.ndarray:
        return self._batched(x, v, lambda st: st.reduce(gain_loss_products(*st.factors(f))[1]), shift)

    def collision_field(self, f: DistributionField, grid: GridSpec, shift: float = 0.0) -> GridField:
        """C[f] во всех узлах сетки"""
        X, V = grid.nodes()
        logger.debug(f"collision_field: {X.shape[0]} узлов, сдвиг {shift:g}")
        return GridField(grid, self.eval_C(f, X, V, shift), description=f"C[{f.description}]")

    def fiber_measure(self, v, v1) -> np.ndarray:
        """Мера слоя δ-многообразия над (v, v1): 2^{-3}|v−v1|·Σw_σ = (π/2)|v−v1|"""
        gap = np.linalg.norm(np.asarray(v, dtype=float) - np.asarray(v1, dtype=float), axis=-1)
        return 0.125 * gap * float(np.sum(self.cfg.sphere_rule.weights))

    def _weak_terms(self, f: DistributionField, x, phi: TestFunction, outer_box=None):
        outer = outer_box or self.cfg.box_rule
        x = np.asarray(x, dtype=float)
        X = np.broadcast_to(x, outer.nodes.shape)
        blocks = self.pool.chunks(outer.nodes.shape[0], self.cfg.chunk_size())

        def run(block: slice) -> tuple[np.ndarray, np.ndarray]:
            st = CollisionStencil(X[block], outer.nodes[block], self.cfg)
            gain, loss = gain_loss_products(*st.factors(f))
            tests = [np.asarray(phi(w), dtype=float) for w in (st.v, st.v1, st.v2, st.v3)]
            combination = tests[0] + tests[1] - tests[2] - tests[3]
            magnitude = np.abs(tests[0]) + np.abs(tests[1]) + np.abs(tests[2]) + np.abs(tests[3])
            signed = st.reduce((gain - loss) * combination)
            absolute = st.reduce((gain + loss) * magnitude)
            return signed, absolute

        parts = self.pool.map(run, blocks)
        signed = np.concatenate([p[0] for p in parts])
        absolute = np.concatenate([p[1] for p in parts])
        return 0.25 * np.sum(outer.weights * signed), 0.25 * np.sum(outer.weights * absolute)

    def weak_form_average(self, f: DistributionField, x, phi: TestFunction) -> float:
        """
        Симметризованная слабая форма ∫ C[f] φ dv = ¼ ∭ (φ + φ1 − φ2 − φ3)·(...).
        Для инвариантов столкновений подынтегральное выражение равно нулю поточечно.
        """
        return float(self._weak_terms(f, x, phi)[0])

    def weak_form_magnitude(self, f: DistributionField, x, phi: TestFunction) -> float:
        """Та же квадратура для модулей слагаемых: масштаб для относительных сравнений"""
        return float(self._weak_terms(f, x, phi)[1])

    def strong_moment(self, f: DistributionField, x, phi: TestFunction, outer_box=None) -> float:
        """∫ C[f](x, v) φ(v) dv квадратурой по сильной форме"""
        outer = outer_box or self.cfg.box_rule
        V = outer.nodes
        values = self.eval_C(f, np.broadcast_to(np.asarray(x, dtype=float), V.shape), V)
        return float(np.sum(outer.weights * values * np.asarray(phi(V), dtype=float)))

    def moment_study(
        self, f: DistributionField, x, phi: TestFunction, resolutions: Sequence[int]
    ) -> list[MomentStudyRow]:
        """
        Сходимость сильной формы к слабой при удвоении разрешения по скорости.
        Для каждого n строится отдельный сервис с BoxRule n³.
        """
        rows: list[MomentStudyRow] = []
        for n in resolutions:
            box = BoxRuleSpec(n=n, v_max=self.cfg.box.v_max)
            service = CollisionService(self.cfg.model_copy(update={"box": box}), self.pool)
            strong = service.strong_moment(f, x, phi, build_box_rule(box))
            weak = service.weak_form_average(f, x, phi)
            error = abs(strong - weak)
            reduction = rows[-1].error / error if rows and error > 0 else None
            rows.append(MomentStudyRow(n=n, strong=strong, weak=weak, error=error, reduction=reduction))
            logger.info(f"moment_study: n={n}, сильная {strong:.6e}, слабая {weak:.6e}, ошибка {error:.3e}")
        return rows
