import numpy as np
from pydantic import BaseModel
from scipy.special import beta as beta_function
from scipy.special import gamma

from models.phase import WeightParams


def sphere_area(d: int) -> float:
    """ω_{d−1} = 2π^{d/2}/Γ(d/2), площадь единичной сферы в R^d"""
    return float(2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0))


def constant_C(w: WeightParams) -> float:
    """C_{p,q,α,β} = 16pπ³/(α(p−1))·(1/3 + 1/(q−3))·max{β^q, β^{−3q}}"""
    if not (w.p > 1.0 and w.q > 3.0):
        raise ValueError(f"Константа C определена при p > 1 и q > 3, получено p={w.p}, q={w.q}")
    return float(
        16.0 * w.p * np.pi**3 / (w.alpha * (w.p - 1.0))
        * (1.0 / 3.0 + 1.0 / (w.q - 3.0))
        * max(w.beta**w.q, w.beta ** (-3.0 * w.q))
    )


def constant_L(q: float, delta: float, d: int = 3) -> float:
    """L_{q,δ} = ω_{d−1}(1/d + 1/(d+δ) + 2/(q−d−δ)) при δ ∈ (−d, 0], q > d + δ"""
    if not -d < delta <= 0.0:
        raise ValueError(f"Показатель δ должен лежать в (−{d}, 0], получено {delta}")
    if not q > d + delta:
        raise ValueError(f"Требуется q > d + δ, получено q={q}, d+δ={d + delta}")
    return sphere_area(d) * (1.0 / d + 1.0 / (d + delta) + 2.0 / (q - d - delta))


def constant_Ltilde(q: float, d: int = 3) -> float:
    """Ũ_q = 2^{−d}ω²_{d−1}(1/d + 1/(2d−3) + 2/(q−2d+3)); при d = 3 это 4π²(1/3 + 1/(q−3))"""
    if d != 3:
        raise ValueError(f"Константа определена только при d = 3, получено {d}")
    if not q > 2 * d - 3:
        raise ValueError(f"Требуется q > 2d − 3, получено q={q}")
    return 2.0 ** (-d) * sphere_area(d) ** 2 * (1.0 / d + 1.0 / (2 * d - 3) + 2.0 / (q - 2 * d + 3))


def constant_U(q: float) -> float:
    """U_q = 2π³(1/3 + 1/(q−3))"""
    if not q > 3.0:
        raise ValueError(f"Константа U_q определена при q > 3, получено {q}")
    return float(2.0 * np.pi**3 * (1.0 / 3.0 + 1.0 / (q - 3.0)))


def one_bracket_bound(p: float) -> float:
    return 2.0 * p / (p - 1.0)


def one_bracket_closed_form(x, eta, p: float) -> float:
    """∫_R ⟨x+sη⟩^{−p} ds = A^{(1−p)/2}/|η|·B(1/2, (p−1)/2), A = 1 + |x_⊥|²"""
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    norm = float(np.linalg.norm(eta))
    center = -float(x @ eta) / norm**2
    shifted = x + center * eta
    a = 1.0 + float(shifted @ shifted)
    return a ** ((1.0 - p) / 2.0) / norm * float(beta_function(0.5, (p - 1.0) / 2.0))


def convolution_at_origin(q: float, delta: float) -> float:
    """∫_{R³} |y|^δ⟨y⟩^{−q} dy = 2π·B((3+δ)/2, (q−3−δ)/2)"""
    return float(2.0 * np.pi * beta_function((3.0 + delta) / 2.0, (q - 3.0 - delta) / 2.0))


def delta_convolution_at_origin(q: float) -> float:
    """Резонансный интеграл свертки в v = 0: π²·B(3/2, (q−3)/2)"""
    return float(np.pi**2 * beta_function(1.5, (q - 3.0) / 2.0))


class HierarchyConstants(BaseModel):
    mu: float
    mu_prime: float
    constant_C: float
    radius: float  # M = e^{−μ}
    data_radius: float  # e^{−μ′}
    regime: bool  # e^{2μ} > 32C


def hierarchy_constants(w: WeightParams) -> HierarchyConstants:
    c = constant_C(w)
    return HierarchyConstants(
        mu=w.mu,
        mu_prime=w.mu_prime,
        constant_C=c,
        radius=float(np.exp(-w.mu)),
        data_radius=float(np.exp(-w.mu_prime)),
        regime=bool(np.exp(2.0 * w.mu) > 32.0 * c),
    )


def contraction_threshold(w: WeightParams) -> float:
    """Порог радиуса шара (24C)^{−1/2}"""
    return float((24.0 * constant_C(w)) ** -0.5)
