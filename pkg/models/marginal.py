from typing import Sequence

import numpy as np

from models.collision import CollisionConfig, Term
from models.phase import DistributionField
from models.resonance import post_collision


def _as_particles(X, V, order: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if X.shape[-2:] != (order, 3) or V.shape[-2:] != (order, 3):
        raise ValueError(f"Ожидались аргументы формы (..., {order}, 3), получено {X.shape} и {V.shape}")
    return X, V


class Marginal:
    """Симметричная (или помеченная) функция k частиц f^{(k)}(X_k, V_k)"""
    order: int
    description: str = "marginal"

    def evaluate(self, X, V) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X, V) -> np.ndarray:
        return self.evaluate(X, V)

    def transported(self, s: float) -> "Marginal":
        return TransportedMarginal(self, s)


class TensorPower(Marginal):
    """h^{⊗k}(X_k, V_k) = ∏ h(x_i, v_i)"""

    def __init__(self, field: DistributionField, k: int):
        if k < 1:
            raise ValueError(f"Порядок тензорной степени должен быть не меньше 1, получено {k}")
        self.field = field
        self.order = k
        self.description = f"({field.description})^⊗{k}"

    def evaluate(self, X, V) -> np.ndarray:
        X, V = _as_particles(X, V, self.order)
        return np.prod(self.field.evaluate(X, V), axis=-1)

    def transported(self, s: float) -> "TensorPower":
        return TensorPower(self.field.transported(s), self.order)


def tensorize(h: DistributionField, k: int) -> TensorPower:
    return TensorPower(h, k)


class Mixture(Marginal):
    """Конечная смесь Σ w_i m_i функций одного порядка"""

    def __init__(self, weights: Sequence[float], components: Sequence[Marginal]):
        if len(weights) != len(components) or not components:
            raise ValueError("Число весов смеси должно совпадать с числом компонент")
        orders = {c.order for c in components}
        if len(orders) != 1:
            raise ValueError(f"Компоненты смеси имеют разные порядки: {sorted(orders)}")
        self.weights = tuple(float(w) for w in weights)
        self.components = tuple(components)
        self.order = orders.pop()
        self.description = "mixture"

    def evaluate(self, X, V) -> np.ndarray:
        total = 0.0
        for weight, component in zip(self.weights, self.components):
            total = total + weight * component.evaluate(X, V)
        return total

    def transported(self, s: float) -> "Mixture":
        return Mixture(self.weights, [c.transported(s) for c in self.components])


class LabeledProduct(Marginal):
    """Несимметричное произведение ∏ h_i(x_i, v_i) с разными множителями"""

    def __init__(self, factors: Sequence[DistributionField]):
        if not factors:
            raise ValueError("Нужен хотя бы один множитель")
        self.factors = tuple(factors)
        self.order = len(self.factors)
        self.description = "labeled"

    def evaluate(self, X, V) -> np.ndarray:
        X, V = _as_particles(X, V, self.order)
        total = 1.0
        for i, factor in enumerate(self.factors):
            total = total * factor.evaluate(X[..., i, :], V[..., i, :])
        return total

    def transported(self, s: float) -> "LabeledProduct":
        return LabeledProduct([f.transported(s) for f in self.factors])


class SwappedMarginal(Marginal):
    """
    S_{j,j+2}: обмен аргументов в позициях (j−1, j) и (j+1, j+2), нумерация с 1.
    """

    def __init__(self, base: Marginal, j: int):
        if j < 2 or base.order <= j + 1:
            raise ValueError(f"Перестановка S_{{{j},{j + 2}}} требует порядок больше {j + 1}, получен {base.order}")
        self.base = base
        self.j = j
        self.order = base.order
        index = np.arange(self.order)
        index[[j - 2, j - 1, j, j + 1]] = [j, j + 1, j - 2, j - 1]
        self.index = index
        self.description = f"S_{j},{j + 2}[{base.description}]"

    def evaluate(self, X, V) -> np.ndarray:
        X, V = _as_particles(X, V, self.order)
        return self.base.evaluate(X[..., self.index, :], V[..., self.index, :])

    def transported(self, s: float) -> "SwappedMarginal":
        return SwappedMarginal(self.base.transported(s), self.j)


def swap_apply(f: Marginal, j: int) -> SwappedMarginal:
    return SwappedMarginal(f, j)


class TransportedMarginal(Marginal):
    """(T_k^s m)(X, V) = m(X − sV, V); сдвиги складываются"""

    def __init__(self, base: Marginal, shift: float):
        self.base = base
        self.shift = float(shift)
        self.order = base.order
        self.description = f"T^{shift:g}[{base.description}]"

    def evaluate(self, X, V) -> np.ndarray:
        X, V = _as_particles(X, V, self.order)
        if self.shift == 0.0:
            return self.base.evaluate(X, V)
        return self.base.evaluate(X - self.shift * V, V)

    def transported(self, s: float) -> "TransportedMarginal":
        return TransportedMarginal(self.base, self.shift + s)


GAIN_TERMS = ((Term.L0, 1.0), (Term.L1, 1.0))
LOSS_TERMS = ((Term.L2, 1.0), (Term.L3, 1.0))
FULL_TERMS = ((Term.L0, 1.0), (Term.L1, 1.0), (Term.L2, -1.0), (Term.L3, -1.0))


class CollisionImage(Marginal):
    """
    Образ 𝔠^λ_{j,k+2} m функции порядка k+2: интеграл по (v_{k+1}, v_{k+2}, v_{k+3})
    с (v_j, v_{k+1}) в ролях (v, v1). Слагаемые со знаками складываются в заданном порядке.
    """

    def __init__(self, terms: Sequence[tuple[Term, float]], j: int, base: Marginal, cfg: CollisionConfig):
        k = base.order - 2
        if k < 1:
            raise ValueError(f"Оператор столкновений иерархии требует порядок не меньше 3, получен {base.order}")
        if not 1 <= j <= k:
            raise ValueError(f"Номер частицы j должен лежать в 1..{k}, получено {j}")
        self.terms = tuple((Term.parse(term), float(sign)) for term, sign in terms)
        self.j = j
        self.base = base
        self.cfg = cfg
        self.order = k
        names = "".join(f"{'+' if sign > 0 else '-'}{term.name}" for term, sign in self.terms)
        self.description = f"c[{names}]_{j},{base.order}[{base.description}]"

    def _arguments(self, term: Term, X: np.ndarray, V: np.ndarray, v1, v2, v3):
        """Аргументы base формы (P, M, S, k+2, 3)"""
        P, M, S = v2.shape[:3]
        k = self.order
        shape = (P, M, S, k, 3)
        head = np.broadcast_to(V[:, None, None, :, :], shape)
        v1 = np.broadcast_to(v1, (P, M, S, 3))
        if term == Term.L0:
            head = head.copy()
            head[..., self.j - 1, :] = v1
            tail = (v2, v3)
        elif term == Term.L1:
            tail = (v2, v3)
        elif term == Term.L2:
            tail = (v1, v3)
        else:
            tail = (v1, v2)
        args_v = np.concatenate([head, tail[0][..., None, :], tail[1][..., None, :]], axis=-2)
        xj = X[:, self.j - 1, :]
        args_x = np.concatenate([X, xj[:, None, :], xj[:, None, :]], axis=-2)[:, None, None, :, :]
        return args_x, args_v

    def _evaluate_block(self, X: np.ndarray, V: np.ndarray) -> np.ndarray:
        box, sphere = self.cfg.box_rule, self.cfg.sphere_rule
        vj = V[:, self.j - 1, :][:, None, None, :]
        v1 = box.nodes[None, :, None, :]
        v2, v3 = post_collision(vj, v1, sphere.nodes[None, None, :, :])
        kernel = 0.125 * np.linalg.norm(vj - v1, axis=-1)[..., 0] * box.weights[None, :]
        total = np.zeros(X.shape[0])
        for term, sign in self.terms:
            args_x, args_v = self._arguments(term, X, V, v1, v2, v3)
            values = self.base.evaluate(args_x, args_v)
            inner = np.sum(values * sphere.weights, axis=-1)
            total = total + sign * np.sum(inner * kernel, axis=-1)
        return total

    def evaluate(self, X, V) -> np.ndarray:
        X, V = _as_particles(X, V, self.order)
        X, V = np.broadcast_arrays(X, V)
        lead = X.shape[:-2]
        X = X.reshape(-1, self.order, 3)
        V = V.reshape(-1, self.order, 3)
        per_point = 3 * (self.order + 2) * self.cfg.box_rule.nodes.shape[0] * self.cfg.sphere_rule.nodes.shape[0]
        size = max(1, self.cfg.chunk_budget // per_point)
        parts = [self._evaluate_block(X[i:i + size], V[i:i + size]) for i in range(0, X.shape[0], size)]
        values = np.concatenate(parts) if parts else np.zeros(0)
        return values.reshape(lead)


class DuhamelImage(Marginal):
    """
    ∫_0^T T_k^{−s} 𝔠_{j,k+2} T_{k+2}^{s} m ds по правилу TimeRule на всем [0, T];
    результат не зависит от времени, поэтому образы можно вкладывать друг в друга.
    """

    def __init__(self, terms: Sequence[tuple[Term, float]], j: int, base: Marginal, cfg: CollisionConfig, rule):
        self.terms = tuple(terms)
        self.j = j
        self.base = base
        self.cfg = cfg
        self.rule = rule
        self.order = CollisionImage(self.terms, j, base, cfg).order
        self.description = f"D_{j}[{base.description}]"

    def evaluate(self, X, V) -> np.ndarray:
        X, V = _as_particles(X, V, self.order)
        X, V = np.broadcast_arrays(X, V)
        total = np.zeros(X.shape[:-2])
        for s, weight in zip(self.rule.nodes, self.rule.weights):
            image = CollisionImage(self.terms, self.j, self.base.transported(float(s)), self.cfg)
            total = total + weight * image.evaluate(X + s * V, V)
        return total
