import argparse
import logging

from commands import command_report
from config.run_config import RunConfig
from models.collision import Term
from models.errors import ConfigurationError
from models.marginal import TensorPower
from models.phase import NormSampler, gaussian_field
from runtime.pool import WorkerPool
from schemas.reports import BoundReport, CommandReport
from services import get_bounds_service, get_hierarchy_service

logger = logging.getLogger("app")

LEMMAS = (
    "one_bracket",
    "time_integral",
    "convolution",
    "delta_convolution",
    "velocity_weight",
    "apriori_equation",
    "apriori_hierarchy",
    "apriori_iterated",
)


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="Численная проверка интегральных оценок")
    parser.add_argument("lemma", nargs="?", choices=LEMMAS + ("all",), help="Оценка или all")
    parser.add_argument("--samples", type=int, help="Число выборок параметров")
    parser.set_defaults(handler=run_verify, report_name="verify")


def run_lemma(lemma: str, run_config: RunConfig, pool: WorkerPool, samples: int) -> list[BoundReport]:
    section = run_config.verify
    bounds = get_bounds_service(run_config.run.seed, pool, sigma=run_config.velocity_sphere())
    w = run_config.weights
    grid = run_config.grid
    h = gaussian_field(amplitude=1.0, homogeneous=grid.homogeneous)

    if lemma == "one_bracket":
        return [bounds.verify_one_bracket(samples)]
    if lemma == "time_integral":
        return [bounds.verify_time_integral(samples)]
    if lemma == "convolution":
        return [bounds.verify_convolution(samples, section.qs, section.deltas)]
    if lemma == "delta_convolution":
        return [bounds.verify_delta_convolution(samples, section.qs)]
    if lemma == "velocity_weight":
        return [bounds.verify_velocity_weight(samples, section.qs)]
    if lemma == "apriori_equation":
        return [
            bounds.verify_apriori_equation(
                h, h, h, w, run_config.solver.horizon, grid, run_config.quadrature.collision(),
                time=run_config.quadrature.time(), norm_samples=run_config.solver.norm_samples,
            )
        ]
    if lemma == "apriori_hierarchy":
        service = get_hierarchy_service(run_config.solver_config(), pool)
        X, V = grid.nodes()
        m = TensorPower(h, 3)
        return [
            service.verify_apriori_hierarchy(
                1, 1, term, m, w, run_config.solver.horizon, X[:, None, :], V[:, None, :],
                time=run_config.quadrature.time(),
            )
            for term in Term
        ]
    if lemma == "apriori_iterated":
        sampler = NormSampler(grid=grid, n_random=0, seed=run_config.run.seed)
        X, V = sampler.particle_points(1, run_config.collision.probes)
        return [
            bounds.verify_apriori_iterated(
                TensorPower(h, 5), w, run_config.solver.horizon, run_config.quadrature.coarse_collision(), X, V,
                sampler=NormSampler(grid=grid, n_random=run_config.solver.norm_samples, seed=run_config.run.seed),
            )
        ]
    raise ConfigurationError(f"Неизвестная оценка: {lemma}", {"lemma": lemma})


def run_verify(args: argparse.Namespace, run_config: RunConfig, pool: WorkerPool) -> CommandReport:
    """Один отчет BoundReport на каждую оценку; статус 1, если хотя бы одна нарушена"""
    lemma = args.lemma or run_config.verify.lemma
    samples = args.samples or run_config.verify.samples
    selected = LEMMAS if lemma == "all" else (lemma,)
    reports: list[BoundReport] = []
    for name in selected:
        logger.info(f"Проверка оценки {name}")
        reports.extend(run_lemma(name, run_config, pool, samples))
    failed = [r.lemma for r in reports if not r.passed]
    if failed:
        logger.error(f"Нарушены оценки: {', '.join(failed)}")
    return command_report("verify", 1 if failed else 0, run_config, reports)
