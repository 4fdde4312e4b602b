import argparse
import logging

from pydantic import ValidationError

from commands import command_report
from config.run_config import RunConfig
from models.errors import ConfigurationError
from runtime.pool import WorkerPool
from schemas.reports import CommandReport
from services import get_hierarchy_service
from services.hierarchy_service import GaussianComponent, MixtureData

logger = logging.getLogger("app")


def register(subparsers) -> None:
    parser = subparsers.add_parser("hierarchy", help="Срезы иерархии по решениям уравнения")
    parser.add_argument("action", choices=("residual", "admissibility", "mixture"))
    parser.add_argument("--mixture", help="JSON-файл с данными смеси")
    parser.set_defaults(handler=run_hierarchy, report_name="hierarchy")


def load_mixture(path) -> MixtureData:
    """
    Данные смеси из файла или одна гауссова компонента единичной массы.

    Raises:
        ConfigurationError: если файл не читается или данные некорректны
    """
    if not path:
        return MixtureData(weights=[1.0], components=[GaussianComponent(x_width=6.0, v_width=1.0)])
    try:
        return MixtureData.from_json(path)
    except (OSError, ValueError) as e:
        raise ConfigurationError(f"Некорректные данные смеси {path}: {e}", {"path": str(path)})


def run_hierarchy(args: argparse.Namespace, run_config: RunConfig, pool: WorkerPool) -> CommandReport:
    section = run_config.hierarchy
    mix = load_mixture(args.mixture or section.mixture)
    cfg = run_config.hierarchy_solver_config()
    service = get_hierarchy_service(cfg, pool)
    logger.info(f"Иерархия: {args.action}, компонент {len(mix.components)}, μ={cfg.weights.mu:.4f}")

    if args.action == "admissibility":
        # Проверка на однородных компонентах: интеграл только по v_{k+1}
        report = service.admissibility_check(mix.sequence(section.levels, homogeneous=True), homogeneous=True)
        return command_report("hierarchy admissibility", 0 if report.passed else 1, run_config, report)

    if args.action == "mixture":
        _, report = service.mixture_solution(mix, section.k_max, section.residual_levels, section.probes)
        ok = report.hierarchy_bound_ok and report.tensor_stability_ok is not False
        ok = ok and report.residuals_ok
        return command_report("hierarchy mixture", 0 if ok else 1, run_config, report)

    path, report = service.mixture_solution(mix, section.k, residual_levels=0, probes=section.probes)
    residual = service.duhamel_residual(section.k, path, probes=section.probes, mode=section.probe_mode)
    status = 0 if residual.passed else 1
    return command_report("hierarchy residual", status, run_config, {"mixture": report, "residual": residual})
