import argparse
import logging
import sys
from typing import Optional, Sequence

from commands import boardgame, collision, hierarchy, solve, verify, write_report
from config.run_config import load_run_config
from config.settings import settings
from lifespan import global_lifespan
from models.errors import WorkbenchError

# Настройка логирования
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger("app")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Стенд для 4-волнового кинетического уравнения и его иерархии",
    )
    parser.add_argument("--config", help="INI или JSON файл конфигурации запуска")
    parser.add_argument("--seed", type=int, help="Зерно запуска")
    parser.add_argument("--sequential", action="store_true", help="Последовательное выполнение в одном потоке")
    parser.add_argument("--workers", type=int, help="Число потоков")
    parser.add_argument("--out", help="Каталог для отчетов и срезов")
    parser.add_argument("--log-level", help="Уровень логирования")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Регистрируем команды
    for module in (solve, collision, verify, boardgame, hierarchy):
        module.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входа CLI.

    Returns:
        int: 0, если все проверки пройдены, 1 при нарушенном контракте, 2 при ошибке конфигурации
    """
    args = build_parser().parse_args(argv)
    try:
        run_config = load_run_config(args.config).with_overrides(
            seed=args.seed, out=args.out, workers=args.workers, sequential=args.sequential
        )
        level = args.log_level or run_config.run.log_level
        logging.getLogger().setLevel(level.upper())
        logger.info(f"Команда {args.command}, зерно {run_config.run.seed}, потоков {run_config.run.workers}")
        with global_lifespan(run_config) as pool:
            report = args.handler(args, run_config, pool)
        write_report(report, run_config.run.output_dir, args.report_name)
        print(report.model_dump_json(indent=2))
        return report.status
    except WorkbenchError as e:
        logger.error(f"Ошибка выполнения команды {args.command}: {e.detail}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"Некорректные параметры команды {args.command}: {str(e)}")
        return 2


if __name__ == "__main__":
    logger.info("Запуск стенда")
    sys.exit(main())
