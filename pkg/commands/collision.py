import argparse
import logging

import numpy as np

from commands import command_report, preset_field
from config.run_config import RunConfig
from models.collision import Term
from models.phase import NormSampler
from runtime.pool import WorkerPool
from schemas.reports import CommandReport
from services import get_collision_service
from services.oracle import MonteCarloOracle

logger = logging.getLogger("app")

# Инварианты столкновений: масса, первая компонента импульса, энергия
INVARIANTS = {
    "mass": lambda v: np.ones(v.shape[:-1]),
    "momentum_x": lambda v: v[..., 0],
    "energy": lambda v: np.sum(v * v, axis=-1),
}
WEAK_FORM_TOLERANCE = 1e-12


def register(subparsers) -> None:
    parser = subparsers.add_parser("collision-eval", help="Значения L_j, C и слабой формы в пробных точках")
    parser.set_defaults(handler=run_collision_eval, report_name="collision_eval")


def run_collision_eval(args: argparse.Namespace, run_config: RunConfig, pool: WorkerPool) -> CommandReport:
    section = run_config.collision
    grid = run_config.grid
    service = get_collision_service(run_config.quadrature.collision(), pool)
    f = preset_field(run_config, grid.homogeneous)
    sampler = NormSampler(grid=grid, n_random=section.probes, seed=run_config.run.seed)
    X, V = sampler.random_points(section.probes)
    logger.info(f"Вычисление столкновений: {section.terms} в {section.probes} точках")

    values = {}
    for name in section.terms:
        if name.upper() == "C":
            values["C"] = service.eval_C(f, X, V).tolist()
        else:
            term = Term.parse(name)
            values[term.name] = service.eval_L(term, f, f, f, X, V).tolist()

    weak = {}
    failures = []
    for name, phi in INVARIANTS.items():
        average = service.weak_form_average(f, X[0], phi)
        magnitude = service.weak_form_magnitude(f, X[0], phi)
        relative = abs(average) / magnitude if magnitude > 0 else abs(average)
        weak[name] = {"average": average, "magnitude": magnitude, "relative": relative}
        if relative > WEAK_FORM_TOLERANCE:
            failures.append(f"weak[{name}]={relative:.3e}")

    oracle_rows = []
    if section.oracle_samples > 0:
        oracle = MonteCarloOracle(run_config.run.seed, samples=section.oracle_samples)
        for name, row in values.items():
            if name == "C":
                estimate = oracle.eval_C(f, X[0], V[0])
            else:
                estimate = oracle.eval_L(Term.parse(name), f, f, f, X[0], V[0])
            agrees = estimate.agrees(row[0])
            oracle_rows.append({"term": name, "quadrature": row[0], "oracle": estimate, "agrees": agrees})
            if not agrees:
                failures.append(f"oracle[{name}]")

    if failures:
        logger.error(f"Проверки оператора столкновений не пройдены: {', '.join(failures)}")
    result = {
        "probes": {"x": X.tolist(), "v": V.tolist()},
        "values": values,
        "weak_form": weak,
        "oracle": oracle_rows,
        "tail_bounds": run_config.tail_bounds(),
    }
    return command_report("collision-eval", 1 if failures else 0, run_config, result)
