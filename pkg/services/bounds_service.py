import logging
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from models.collision import CollisionConfig, Term
from models.constants import (
    constant_C,
    constant_L,
    constant_Ltilde,
    constant_U,
    one_bracket_bound,
)
from models.marginal import GAIN_TERMS, LOSS_TERMS, DuhamelImage, Marginal
from models.phase import DistributionField, GridSpec, NormSampler, WeightParams, bracket
from models.quadrature import (
    LineRule,
    SphereKernel,
    SphereRuleSpec,
    TimeRule,
    TimeRuleSpec,
    build_sphere_rule,
)
from models.resonance import post_collision
from models.solver import panel_integrals
from runtime.pool import WorkerPool
from runtime.seeding import derive_rng
from schemas.reports import BoundReport
from services.collision_service import CollisionService
from services.norm_service import NormService

logger = logging.getLogger("workbench")

RATIO_TOLERANCE = 1e-9
# Прокси для t → ∞ в оценке интеграла по времени
TIME_INFINITY = 1e3
# Порог перехода на ряд в угловом множителе свертки
SERIES_THRESHOLD = 1e-4
ORTHOGONALITY_TOLERANCE = 1e-12


def one_bracket_integral(x, eta, p: float, n: int = 48) -> float:
    """∫_R ⟨x+sη⟩^{−p} ds; замена s = c + √A/|η|·tg θ с весом Якоби на концах"""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    norm = float(np.linalg.norm(eta))
    if norm == 0.0:
        raise ValueError("Вектор η должен быть ненулевым")
    center = -float(x @ eta) / norm**2
    shifted = x + center * eta
    scale = float(np.sqrt(1.0 + shifted @ shifted)) / norm
    rule = LineRule(n=n, center=center, scale=scale, powers=(p - 2.0, p - 2.0))
    return rule.integrate(lambda s: bracket(x + s[:, None] * eta) ** (-p))


def time_integral(x, xi, eta, p: float, t: float, n: int = 24, panels: int = 16) -> float:
    """
    ∫_0^t ⟨x+sξ⟩^{−p}⟨x+sη⟩^{−p} ds при ξ·η = 0.

    Raises:
        ValueError: если ξ и η не ортогональны или один из них нулевой
    """
    x, xi, eta = (np.asarray(a, dtype=float) for a in (x, xi, eta))
    xi_norm, eta_norm = float(np.linalg.norm(xi)), float(np.linalg.norm(eta))
    if xi_norm == 0.0 or eta_norm == 0.0:
        raise ValueError("Векторы ξ и η должны быть ненулевыми")
    if abs(float(xi @ eta)) > ORTHOGONALITY_TOLERANCE * xi_norm * eta_norm:
        raise ValueError(f"Векторы ξ и η должны быть ортогональны, ξ·η = {float(xi @ eta):.3e}")
    if t < 0:
        raise ValueError(f"Время должно быть неотрицательным, получено {t}")
    if t == 0.0:
        return 0.0
    peak = -float(x @ (xi + eta)) / (xi_norm**2 + eta_norm**2)
    rule = LineRule(
        n=n,
        center=min(max(peak, 0.0), t),
        scale=float(bracket(x)) / max(xi_norm, eta_norm),
        lower=0.0,
        upper=t,
        panels=panels,
    )
    return rule.integrate(lambda s: bracket(x + s[:, None] * xi) ** (-p) * bracket(x + s[:, None] * eta) ** (-p))


def time_integral_bound(x, xi, eta, p: float) -> float:
    """4p/(p−1)·⟨x⟩^{−p}/min(|ξ|, |η|)"""
    return float(
        4.0 * p / (p - 1.0) * bracket(x) ** (-p) / min(np.linalg.norm(xi), np.linalg.norm(eta))
    )


def _angular_factor(a: np.ndarray, b: np.ndarray, m: float) -> np.ndarray:
    """∫_{S²} (a + b·cos θ)^{−m} dω = 2π∫_{−1}^{1}(a + bu)^{−m} du, a > b ≥ 0"""
    eps = np.divide(b, a, out=np.zeros_like(b), where=a > 0)
    series = a ** (-m) * (2.0 + m * (m + 1.0) * eps**2 / 3.0)
    safe_b = np.where(eps < SERIES_THRESHOLD, 0.5 * a, b)
    if m == 1.0:
        exact = np.log((a + safe_b) / (a - safe_b)) / safe_b
    else:
        exact = ((a - safe_b) ** (1.0 - m) - (a + safe_b) ** (1.0 - m)) / (safe_b * (m - 1.0))
    return 2.0 * np.pi * np.where(eps < SERIES_THRESHOLD, series, exact)


def convolution_integral(v, q: float, delta: float, n: int = 64) -> float:
    """∫_{R³} |y−v|^δ ⟨y⟩^{−q} dy в сферических координатах вокруг v"""
    v = np.asarray(v, dtype=float)
    speed = float(np.linalg.norm(v))
    rule = LineRule(
        n=n,
        center=0.0,
        scale=float(bracket(v)),
        lower=0.0,
        upper=np.inf,
        powers=(2.0 + delta, q - 4.0 - delta),
    )

    def radial(r: np.ndarray) -> np.ndarray:
        a = 1.0 + speed**2 + r * r
        b = 2.0 * r * speed
        return r ** (2.0 + delta) * _angular_factor(a, b, q / 2.0)

    return rule.integrate(radial)


# Показатель гладкого разбиения единицы между центрами пиков по v1
PARTITION_POWER = 4.0


def _radial_rule(center: np.ndarray, q: float, n: int) -> LineRule:
    return LineRule(n=n, center=0.0, scale=float(bracket(center)), lower=0.0, upper=np.inf, powers=(2.0, q - 4.0))


def _partition(v1: np.ndarray, centers: Sequence[np.ndarray], index: int) -> np.ndarray:
    """Доля центра index в разбиении χ_i ∝ ⟨v1 − c_i⟩^{−m}"""
    shares = [bracket(v1 - c) ** (-PARTITION_POWER) for c in centers]
    return shares[index] / np.sum(shares, axis=0)


def resonant_integral(
    v,
    q: float,
    integrand: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    sigma: SphereRuleSpec,
    omega: SphereRuleSpec,
    n_radial: int = 24,
    centers: Optional[Sequence] = None,
) -> float:
    """
    ∫_{R⁹} δ(Σ)δ(Ω) F dv1 dv2 dv3 = 2^{−3}∫∫|v−v1| F dσ dv1.

    Интеграл по v1 делится гладким разбиением единицы между центрами
    (по умолчанию v и 0): каждая доля считается в сферических координатах
    v1 = c + rω вокруг своего центра. Для ядра 1/√(1−(ŵ·σ)²) правило σ
    поворачивается к оси ŵ = (v − v1)/|v − v1| в каждом узле.
    """
    v = np.asarray(v, dtype=float)
    if centers is None:
        centers = (v, np.zeros(3))
    centers = [np.asarray(c, dtype=float) for c in centers]
    omega_rule = build_sphere_rule(omega)
    sigma_rule = build_sphere_rule(sigma)
    directions = omega_rule.nodes  # (K, 3)
    total = 0.0
    for index, center in enumerate(centers):
        radial = _radial_rule(center, q, n_radial)
        v1 = center + radial.nodes[:, None, None] * directions[None, :, :]  # (R, K, 3)
        offset = v - v1
        gap = np.linalg.norm(offset, axis=-1)  # (R, K)
        axes = np.where(gap[..., None] > 0.0, offset / np.where(gap > 0.0, gap, 1.0)[..., None], (0.0, 0.0, 1.0))
        sigmas = sigma_rule.aligned(axes.reshape(-1, 3)).reshape(*gap.shape, -1, 3)  # (R, K, N, 3)
        v1b = v1[:, :, None, :]
        v2, v3 = post_collision(v, v1b, sigmas)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.where(gap[..., None] > 0.0, 0.125 * gap[..., None] * integrand(v, v1b, v2, v3), 0.0)
        inner = np.sum(values * sigma_rule.weights, axis=-1) * _partition(v1, centers, index)  # (R, K)
        shell = np.sum(inner * omega_rule.weights, axis=-1) * radial.nodes**2
        total += float(np.sum(radial.weights * shell))
    return total


def delta_convolution_integral(v, q: float, sigma: SphereRuleSpec, omega: SphereRuleSpec, n_radial: int = 24) -> float:
    """Интеграл δ(Σ)δ(Ω)/(|v−v1|⟨v1⟩^q) по параметризации сферой"""

    def integrand(v, v1, v2, v3):
        return 1.0 / (np.linalg.norm(v - v1, axis=-1) * bracket(v1) ** q)

    return resonant_integral(v, q, integrand, sigma, omega, n_radial)


def velocity_weight_integrals(v, q: float, sigma: SphereRuleSpec, omega: SphereRuleSpec, n_radial: int = 24):
    """
    Пара интегралов с ядром 1/(|v−v1|√(1−(ŵ·σ)²)):
    с весом ⟨v⟩^q/(⟨v1⟩^q⟨v2⟩^q⟨v3⟩^q) и с весом 1/(⟨v2⟩^q⟨v3⟩^q).
    """
    if sigma.kernel != SphereKernel.INVERSE_SINE:
        raise ValueError("Интегралы с весом скоростей требуют правила σ с ядром inverse_sine")
    v = np.asarray(v, dtype=float)

    def three(v, v1, v2, v3):
        gap = np.linalg.norm(v - v1, axis=-1)
        return bracket(v) ** q / (gap * (bracket(v1) * bracket(v2) * bracket(v3)) ** q)

    def two(v, v1, v2, v3):
        gap = np.linalg.norm(v - v1, axis=-1)
        return 1.0 / (gap * (bracket(v2) * bracket(v3)) ** q)

    # Пик веса ⟨v2⟩^{−q}⟨v3⟩^{−q} лежит у v1 = −v
    centers = (v, np.zeros(3), -v)
    return (
        resonant_integral(v, q, three, sigma, omega, n_radial, centers),
        resonant_integral(v, q, two, sigma, omega, n_radial, centers),
    )


def _report(lemma: str, ratios: np.ndarray, samples: list[dict], parameters: dict, notes=None) -> BoundReport:
    ratios = np.asarray(ratios, dtype=float)
    worst = int(np.argmax(ratios)) if ratios.size else 0
    max_ratio = float(ratios[worst]) if ratios.size else 0.0
    passed = max_ratio <= 1.0 + RATIO_TOLERANCE
    if not passed:
        logger.error(f"Оценка {lemma} нарушена: отношение {max_ratio:.6e} на {samples[worst]}")
    else:
        logger.info(f"Оценка {lemma}: {ratios.size} выборок, max LHS/RHS = {max_ratio:.4e}")
    return BoundReport(
        lemma=lemma,
        samples=int(ratios.size),
        parameters=parameters,
        max_ratio=max_ratio,
        worst_sample=samples[worst] if samples else {},
        passed=passed,
        notes=list(notes or []),
    )


class BoundsService:
    """
    Численная проверка интегральных оценок: квадратура левой части и
    сравнение с явной константой на выборке параметров.
    """

    def __init__(
        self,
        pool: WorkerPool,
        seed: int,
        sigma: SphereRuleSpec = SphereRuleSpec(n_theta=6, n_phi=12, kernel=SphereKernel.INVERSE_SINE),
        omega: SphereRuleSpec = SphereRuleSpec(n_theta=6, n_phi=12),
        n_radial: int = 24,
        v_radius: float = 10.0,
        scan_points: int = 21,
    ):
        self.pool = pool
        self.seed = seed
        self.sigma = sigma
        self.omega = omega
        self.n_radial = n_radial
        self.v_radius = v_radius
        self.scan_points = scan_points
        self.norms = NormService(pool)

    def _map_samples(self, func: Callable[[dict], float], samples: list[dict]) -> np.ndarray:
        return np.asarray(self.pool.map(func, samples), dtype=float)

    def velocity_samples(self, count: int, name: str) -> np.ndarray:
        """Квазислучайные v в кубе [−R, R]³ и радиальный скан |v| ∈ [0, R]"""
        points = []
        if count > 0:
            unit = qmc.Halton(d=3, scramble=True, seed=derive_rng(self.seed, name)).random(count)
            points.append(self.v_radius * (2.0 * unit - 1.0))
        direction = np.ones(3) / np.sqrt(3.0)
        radii = np.linspace(0.0, self.v_radius, self.scan_points)
        points.append(radii[:, None] * direction)
        return np.concatenate(points)

    def verify_one_bracket(self, samples: int = 1000) -> BoundReport:
        rng = derive_rng(self.seed, "bounds:one_bracket")
        cases = []
        for _ in range(samples):
            direction = rng.standard_normal(3)
            cases.append(
                {
                    "x": (5.0 * rng.uniform(-1.0, 1.0, 3)).tolist(),
                    "eta": (direction / np.linalg.norm(direction) * 10.0 ** rng.uniform(-1.0, 1.0)).tolist(),
                    "p": float(rng.uniform(1.2, 6.0)),
                }
            )

        def ratio(case: dict) -> float:
            value = one_bracket_integral(case["x"], case["eta"], case["p"])
            return value * float(np.linalg.norm(case["eta"])) / one_bracket_bound(case["p"])

        return _report(
            "one_bracket",
            self._map_samples(ratio, cases),
            cases,
            {"x_range": 5.0, "eta_norm": [0.1, 10.0], "p": [1.2, 6.0], "seed": self.seed},
        )

    def verify_time_integral(self, samples: int = 1000) -> BoundReport:
        rng = derive_rng(self.seed, "bounds:time_integral")
        horizons = (0.0, 1.0, 10.0, TIME_INFINITY)
        cases = []
        for i in range(samples):
            xi = rng.standard_normal(3)
            eta = rng.standard_normal(3)
            eta -= (eta @ xi) / (xi @ xi) * xi
            xi *= 10.0 ** rng.uniform(-1.0, 1.0) / np.linalg.norm(xi)
            eta *= 10.0 ** rng.uniform(-1.0, 1.0) / np.linalg.norm(eta)
            cases.append(
                {
                    "x": (5.0 * rng.uniform(-1.0, 1.0, 3)).tolist(),
                    "xi": xi.tolist(),
                    "eta": eta.tolist(),
                    "p": float(rng.uniform(1.2, 6.0)),
                    "t": horizons[i % len(horizons)],
                }
            )

        def ratio(case: dict) -> float:
            value = time_integral(case["x"], case["xi"], case["eta"], case["p"], case["t"])
            return value / time_integral_bound(case["x"], case["xi"], case["eta"], case["p"])

        return _report(
            "time_integral",
            self._map_samples(ratio, cases),
            cases,
            {"x_range": 5.0, "norms": [0.1, 10.0], "p": [1.2, 6.0], "t": list(horizons), "seed": self.seed},
            notes=[f"t → ∞ проверяется при t = {TIME_INFINITY:g}"],
        )

    def verify_convolution(self, samples: int = 1000, qs: Sequence[float] = (3.5, 4.0, 6.0), deltas=(-2.0, -1.0, 0.0)) -> BoundReport:
        velocities = self.velocity_samples(samples, "bounds:convolution")
        cases = [
            {"v": v.tolist(), "q": q, "delta": delta}
            for q in qs
            for delta in deltas
            if q > 3.0 + delta
            for v in velocities
        ]

        def ratio(case: dict) -> float:
            return convolution_integral(case["v"], case["q"], case["delta"]) / constant_L(case["q"], case["delta"])

        return _report(
            "convolution",
            self._map_samples(ratio, cases),
            cases,
            {"q": list(qs), "delta": list(deltas), "v_radius": self.v_radius, "seed": self.seed},
        )

    def verify_delta_convolution(self, samples: int = 1000, qs: Sequence[float] = (3.5, 4.0, 6.0)) -> BoundReport:
        velocities = self.velocity_samples(samples, "bounds:delta_convolution")
        cases = [{"v": v.tolist(), "q": q} for q in qs for v in velocities]
        sigma = SphereRuleSpec(n_theta=self.sigma.n_theta, n_phi=self.sigma.n_phi)

        def ratio(case: dict) -> float:
            value = delta_convolution_integral(case["v"], case["q"], sigma, self.omega, self.n_radial)
            return value / constant_Ltilde(case["q"])

        return _report(
            "delta_convolution",
            self._map_samples(ratio, cases),
            cases,
            {"q": list(qs), "v_radius": self.v_radius, "seed": self.seed},
        )

    def verify_velocity_weight(self, samples: int = 1000, qs: Sequence[float] = (3.5, 4.0, 6.0)) -> BoundReport:
        velocities = self.velocity_samples(samples, "bounds:velocity_weight")
        cases = [{"v": v.tolist(), "q": q} for q in qs for v in velocities]

        def ratio(case: dict) -> float:
            three, two = velocity_weight_integrals(case["v"], case["q"], self.sigma, self.omega, self.n_radial)
            return max(three, two) / constant_U(case["q"])

        return _report(
            "velocity_weight",
            self._map_samples(ratio, cases),
            cases,
            {"q": list(qs), "v_radius": self.v_radius, "seed": self.seed},
            notes=["отношение берется по максимуму из двух интегралов"],
        )

    def verify_apriori_equation(
        self,
        g: DistributionField,
        h: DistributionField,
        l: DistributionField,
        w: WeightParams,
        horizon: float,
        grid: GridSpec,
        collision: CollisionConfig,
        time: TimeRuleSpec = TimeRuleSpec(panels=4, order=2),
        norm_samples: int = 0,
    ) -> BoundReport:
        """
        ∥∫_0^t T^{−s}L_j(T^s g, T^s h, T^s l) ds∥ ≤ C·∥g∥∥h∥∥l∥ в узлах сетки
        на границах панелей, для каждого j.
        """
        service = CollisionService(collision.transported(), self.pool)
        rule = TimeRule(time, horizon)
        X, V = grid.nodes()
        weight = w.weight(X, V)
        sampler = NormSampler(grid=grid, n_random=norm_samples, seed=self.seed)
        norms = [self.norms.weighted_norm(f, w, sampler) for f in (g, h, l)]
        rhs = constant_C(w) * float(np.prod(norms))
        ratios, cases, per_term = [], [], {}
        for term in Term:
            integrals = panel_integrals(rule, lambda s: service.eval_L(term, g, h, l, X, V, shift=s))
            lhs_by_time = np.max(weight[None, :] * np.abs(integrals), axis=1)
            p = int(np.argmax(lhs_by_time))
            lhs = float(lhs_by_time[p])
            value = lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else np.inf)
            per_term[term.name] = value
            ratios.append(value)
            cases.append({"term": term.name, "time": float(rule.edges[p]), "lhs": lhs, "rhs": rhs})
        return _report(
            "apriori_equation",
            np.asarray(ratios),
            cases,
            {"weights": w.model_dump(), "horizon": horizon, "norms": norms, "ratios": per_term},
        )

    def verify_apriori_iterated(
        self,
        m: Marginal,
        w: WeightParams,
        horizon: float,
        collision: CollisionConfig,
        X,
        V,
        levels: int = 2,
        positions: Optional[Sequence[int]] = None,
        time: TimeRuleSpec = TimeRuleSpec(panels=1, order=2),
        sampler: Optional[NormSampler] = None,
    ) -> BoundReport:
        """
        Итерированная оценка: n вложенных операторов прихода или ухода,
        время по всему кубу [0, T]^n, правая часть (2C)^n·∥m∥_{k+2n}.
        """
        k = m.order - 2 * levels
        if k < 1:
            raise ValueError(f"Порядок {m.order} недостаточен для {levels} уровней")
        positions = list(positions) if positions is not None else [1] * levels
        rule = TimeRule(time, horizon)
        sampler = sampler or NormSampler(n_random=64, seed=self.seed, x_max=1.0, v_max=1.0)
        norm = self.norms.marginal_norm(m, w, sampler)
        rhs = (2.0 * constant_C(w)) ** levels * norm
        weight = w.weight_k(X, V)
        ratios, cases = [], []
        for signs in np.ndindex(*(2,) * levels):
            image: Marginal = m
            for level in range(levels, 0, -1):
                terms = GAIN_TERMS if signs[level - 1] == 0 else LOSS_TERMS
                image = DuhamelImage(terms, positions[level - 1], image, collision, rule)
            lhs = float(np.max(weight * np.abs(image.evaluate(X, V)), initial=0.0))
            pattern = ["gain" if s == 0 else "loss" for s in signs]
            ratios.append(lhs / rhs if rhs > 0 else (0.0 if lhs == 0.0 else np.inf))
            cases.append({"pattern": pattern, "lhs": lhs, "rhs": rhs})
        return _report(
            "apriori_iterated",
            np.asarray(ratios),
            cases,
            {"k": k, "levels": levels, "positions": positions, "horizon": horizon, "norm": norm},
        )
