import argparse
import logging

from commands import command_report, write_csv
from config.run_config import RunConfig
from models.board import BoardState, HistoryMap, echelon_bound, enumerate_histories, history_count
from models.marginal import LabeledProduct, TensorPower
from models.phase import NormSampler, gaussian_field
from runtime.pool import WorkerPool
from runtime.seeding import derive_rng
from schemas.reports import CommandReport
from services import get_boardgame_service
from services.boardgame_service import count_echelon, partition_classes, reduction_trace, uniqueness_report

logger = logging.getLogger("app")


def register(subparsers) -> None:
    parser = subparsers.add_parser("boardgame", help="Настольная игра над картами истории столкновений")
    parser.add_argument("action", choices=("enumerate", "reduce", "count", "invariance"))
    parser.add_argument("--k", type=int, help="Число исходных частиц k")
    parser.add_argument("--n", type=int, help="Число столкновений n")
    parser.set_defaults(handler=run_boardgame, report_name="boardgame")


def _history(run_config: RunConfig, k: int, n: int) -> HistoryMap:
    """μ из конфигурации или случайная карта из M_{n,k} по зерну запуска"""
    mu = run_config.boardgame.mu
    if mu:
        return HistoryMap(k=k, n=n, values=tuple(mu))
    rng = derive_rng(run_config.run.seed, f"boardgame:mu:{k}:{n}")
    values = tuple(int(rng.integers(1, k + 2 * l - 1)) for l in range(1, n + 1))
    return HistoryMap(k=k, n=n, values=values)


def run_enumerate(run_config: RunConfig, k: int, n: int) -> dict:
    classes = partition_classes(k, n)
    representative = {mu.values: key for key, members in classes.items() for mu in members}
    rows = [
        (" ".join(map(str, mu.values)), int(mu.is_echelon()), " ".join(map(str, representative[mu.values])))
        for mu in enumerate_histories(k, n)
    ]
    path = write_csv(rows, ("mu", "echelon", "class"), run_config.run.output_dir, f"histories_k{k}_n{n}")
    return {"k": k, "n": n, "histories": len(rows), "classes": len(classes), "table": str(path)}


def run_count(run_config: RunConfig, k: int, n: int) -> tuple[dict, bool]:
    count = count_echelon(k, n)
    uniqueness = uniqueness_report(k, n)
    bound = echelon_bound(k, n)
    ok = count <= bound and uniqueness.classes == count
    rows = [(k, n, history_count(k, n), count, bound)]
    write_csv(rows, ("k", "n", "histories", "echelon", "bound"), run_config.run.output_dir, f"count_k{k}_n{n}")
    print(f"{count} {bound}")
    return {"echelon": count, "bound": bound, "uniqueness": uniqueness}, ok


def run_invariance(run_config: RunConfig, pool: WorkerPool, k: int, n: int) -> tuple[dict, bool]:
    section = run_config.boardgame
    service = get_boardgame_service(run_config.quadrature.coarse_collision(), pool)
    mu = _history(run_config, k, n)
    order = k + 2 * n
    sampler = NormSampler(grid=run_config.grid, seed=run_config.run.seed)
    X, V = sampler.particle_points(k, section.probes)
    homogeneous = run_config.grid.homogeneous
    if section.labeled:
        factors = [
            gaussian_field(amplitude=1.0, v_center=(0.1 * i, 0.0, 0.0), homogeneous=homogeneous)
            for i in range(order)
        ]
        m = LabeledProduct(factors)
    else:
        m = TensorPower(gaussian_field(amplitude=1.0, homogeneous=homogeneous), order)
    report = service.verify_move_invariance(
        BoardState.start(mu), m, section.t, X, V, labeled=section.labeled, order=section.order
    )
    return {"invariance": report}, report.passed


def run_boardgame(args: argparse.Namespace, run_config: RunConfig, pool: WorkerPool) -> CommandReport:
    k = args.k or run_config.boardgame.k
    n = args.n or run_config.boardgame.n
    logger.info(f"Настольная игра: {args.action}, k={k}, n={n}")
    ok = True
    if args.action == "enumerate":
        result = run_enumerate(run_config, k, n)
    elif args.action == "reduce":
        trace = reduction_trace(BoardState.start(_history(run_config, k, n)))
        ok = HistoryMap(k=k, n=n, values=tuple(trace.echelon)).is_echelon()
        result = {"trace": trace}
    elif args.action == "count":
        result, ok = run_count(run_config, k, n)
    else:
        result, ok = run_invariance(run_config, pool, k, n)
    if not ok:
        logger.error(f"Проверка настольной игры {args.action} не пройдена")
    return command_report(f"boardgame {args.action}", 0 if ok else 1, run_config, result)
