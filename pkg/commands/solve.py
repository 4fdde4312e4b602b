import argparse
import logging
from pathlib import Path

from commands import command_report, preset_field
from config.run_config import RunConfig
from models.phase import DistributionField
from runtime.pool import WorkerPool
from schemas.reports import CommandReport
from services import get_solver_service
from services.solver_service import SolverService
from storage.checkpoints import CheckpointStore

logger = logging.getLogger("app")

# Допустимый относительный дрейф законов сохранения, гипотеза которых выполнена
CONSERVATION_TOLERANCE = 1e-3


def register(subparsers) -> None:
    parser = subparsers.add_parser("solve", help="Решение уравнения итерациями Пикара")
    parser.set_defaults(handler=run_solve, report_name="solve")


def initial_data(run_config: RunConfig, service: SolverService) -> DistributionField:
    """Поле из пресета, отмасштабированное до ∥f0∥ = data_fraction·M"""
    field = preset_field(run_config, service.cfg.grid.homogeneous)
    norm = service.data_norm(field).value
    if norm == 0.0:
        return field
    return field * (run_config.solver.data_fraction * service.cfg.radius / norm)


def run_solve(args: argparse.Namespace, run_config: RunConfig, pool: WorkerPool) -> CommandReport:
    """
    Решение, невязка, сохранение и, при perturbation > 0, сравнение устойчивости.
    Статус 1, если нарушена ограниченность 2∥f0∥, невязка больше 2·tol, устойчивость
    или дрейф сохраняемой величины при выполненной гипотезе о q.
    """
    cfg = run_config.solver_config()
    out_dir = Path(run_config.run.output_dir)
    service = get_solver_service(cfg, pool, CheckpointStore())
    f0 = initial_data(run_config, service)
    logger.info(f"Запуск решателя: пресет {run_config.solver.initial}, M={cfg.radius:.6e}")

    checkpoints = out_dir / "checkpoints" if run_config.solver.checkpoints else None
    _, report = service.solve(f0, checkpoints)
    result = {"solve": report, "tail_bounds": run_config.tail_bounds()}
    failures = []
    if report.bound_ratio > 2.0 + 0.05:
        failures.append(f"bound_ratio={report.bound_ratio:.4f}")
    if report.mild_residual > 2.0 * cfg.tolerance:
        failures.append(f"mild_residual={report.mild_residual:.3e}")
    if not report.nonnegative:
        failures.append(f"min_value={report.min_value:.3e}")
    if report.conservation is not None:
        for law, drift in report.conservation.violations(CONSERVATION_TOLERANCE).items():
            failures.append(f"{law}_drift={drift:.3e}")

    perturbation = run_config.solver.perturbation
    if perturbation > 0.0:
        stability = service.stability_compare(f0, f0 * (1.0 - perturbation))
        result["stability"] = stability
        if not stability.passed:
            failures.append(f"stability ratio={stability.ratio:.4f}")

    if failures:
        logger.error(f"Контракты решателя нарушены: {', '.join(failures)}")
    return command_report("solve", 1 if failures else 0, run_config, result)
