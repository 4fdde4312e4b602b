import csv
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel

from config.run_config import RunConfig
from models.phase import DistributionField, ZeroField, equilibrium_field, gaussian_field
from schemas.reports import CommandReport

logger = logging.getLogger("app")


def dump(value: Any) -> Any:
    """Отчеты pydantic и списки отчетов в JSON-совместимый вид"""
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(key): dump(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [dump(item) for item in value]
    return value


def command_report(command: str, status: int, run_config: RunConfig, result: Any) -> CommandReport:
    return CommandReport(
        command=command,
        status=status,
        config=run_config.model_dump(mode="json"),
        result=dump(result),
    )


def write_report(report: CommandReport, out_dir, name: str) -> Path:
    """Запись отчета команды; без отметок времени, повторный запуск дает тот же файл"""
    path = Path(out_dir) / f"{name}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Отчет записан: {path}")
    return path


def write_csv(rows: Iterable[Sequence[Any]], header: Sequence[str], out_dir, name: str) -> Path:
    path = Path(out_dir) / f"{name}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Таблица записана: {path}")
    return path


def preset_field(run_config: RunConfig, homogeneous: bool) -> DistributionField:
    """Начальное поле из секции [solver] до масштабирования"""
    solver = run_config.solver
    if solver.initial == "zero":
        return ZeroField()
    if solver.initial == "equilibrium":
        return equilibrium_field(run_config.weights, homogeneous=homogeneous)
    return gaussian_field(amplitude=1.0, x_width=solver.x_width, v_width=solver.v_width, homogeneous=homogeneous)
