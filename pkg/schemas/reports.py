from typing import Any, Optional

from pydantic import BaseModel, Field


class NormEstimate(BaseModel):
    """Оценка sup-нормы вместе с настройками оценщика"""
    value: float
    grid_nodes: int
    random_samples: int
    seed: int


class ConservationRow(BaseModel):
    time: float
    mass: float
    momentum: list[float]
    energy: float


class ConservationReport(BaseModel):
    rows: list[ConservationRow]
    mass_drift: float
    momentum_drift: float
    energy_drift: float
    # Гипотезы теоремы о сохранении: масса q > 4, импульс q > 5, энергия q > 6
    hypotheses: dict[str, bool]
    # Поточечные по x моменты: только диагностика, не проверяются
    pointwise_mass_drift: float
    pointwise_energy_drift: float

    def violations(self, tolerance: float) -> dict[str, float]:
        """Дрейфы выше tolerance для законов, гипотеза которых выполнена"""
        drifts = {"mass": self.mass_drift, "momentum": self.momentum_drift, "energy": self.energy_drift}
        return {law: drift for law, drift in drifts.items() if self.hypotheses.get(law) and drift > tolerance}


class SolveReport(BaseModel):
    converged: bool
    iterations: int
    increments: list[float]
    kappa: float
    radius: float
    threshold: float
    data_norm: NormEstimate
    solution_norm: float
    bound_ratio: float  # |||g||| / ∥f0∥, ожидается ≤ 2
    # Отброшенный хвост сетки ⟨βV_max⟩^{-q}
    tail_bound: float = 0.0
    mild_residual: float
    min_value: float
    nonnegative: bool
    conservation: Optional[ConservationReport] = None
    checkpoints: list[str] = Field(default_factory=list)


class StabilityReport(BaseModel):
    ratio: float  # |||g_f − g_g||| / ∥f0 − g0∥
    difference_norm: float
    data_difference_norm: float
    bound_ratio: float  # |||g_f||| / ∥f0∥
    passed: bool


class BoundReport(BaseModel):
    """Отчет о проверке оценки: проходит, если max LHS/RHS ≤ 1 + 1e-9"""
    lemma: str
    samples: int
    parameters: dict[str, Any]
    max_ratio: float
    worst_sample: dict[str, Any] = Field(default_factory=dict)
    passed: bool
    notes: list[str] = Field(default_factory=list)


class ResidualReport(BaseModel):
    k: int
    probes: int
    probe_mode: str
    residual: float
    times: list[float]
    # Разность интеграла Дюамеля с удвоенными правилами и с базовыми
    quadrature_error: float = 0.0
    tolerance: float = 0.0
    passed: bool = True


class AdmissibilityReport(BaseModel):
    levels: int
    min_value: float
    nonnegative: bool
    symmetry_gap: float
    mass: float
    mass_error: float
    consistency: list[float]  # относительная невязка для k = 1..K−1
    tolerance: float
    passed: bool
    # Масса ∫ f^{(k)} dV_k в пробных X_k: диагностика без проверки
    pointwise_mass: list[float] = Field(default_factory=list)


class MixtureReport(BaseModel):
    components: int
    k_max: int
    component_norms: list[float]
    data_radius: float
    radius: float
    hierarchy_norm: float
    hierarchy_bound_ok: bool
    tensor_stability_ok: Optional[bool] = None
    residuals: dict[int, float] = Field(default_factory=dict)
    residuals_ok: bool = True


class MoveRecord(BaseModel):
    position: int
    mu: list[int]
    sigma: list[int]


class ReductionTrace(BaseModel):
    k: int
    n: int
    start_mu: list[int]
    start_sigma: list[int]
    echelon: list[int]
    sigma: list[int]
    moves: list[MoveRecord]


class UniquenessReport(BaseModel):
    k: int
    n: int
    histories: int
    classes: int
    bound: int
    unique: bool
    counterexamples: list[dict[str, Any]] = Field(default_factory=list)


class IdentityReport(BaseModel):
    term: str
    level: int
    position: int
    mu_value: int
    case: str
    probes: int
    max_gap: float
    scale: float
    passed: bool


class InvarianceReport(BaseModel):
    mu: list[int]
    sigma: list[int]
    mu_moved: list[int]
    sigma_moved: list[int]
    labeled: bool
    probes: int
    values: list[float]
    values_moved: list[float]
    max_gap: float
    passed: bool


class CommandReport(BaseModel):
    """Обертка отчета команды: результат и эффективная конфигурация"""
    command: str
    status: int
    config: dict[str, Any]
    result: Any
