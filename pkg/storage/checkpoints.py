import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel

from models.phase import GridField, GridLayout, GridSpec, WeightParams

logger = logging.getLogger("workbench")

# Заголовок: x_max, v_max (<f8), затем n_x, n_v, код раскладки (<i8)
HEADER_REALS = np.dtype("<f8")
HEADER_INTS = np.dtype("<i8")
HEADER_SIZE = 2 * HEADER_REALS.itemsize + 3 * HEADER_INTS.itemsize

LAYOUT_CODES = {GridLayout.UNIFORM: 0, GridLayout.CELL_CENTERED: 1}


class Checkpoint(BaseModel):
    """Прочитанный срез: сетка, веса и значения в узлах"""
    model_config = {"arbitrary_types_allowed": True}

    grid: GridSpec
    weights: Optional[WeightParams] = None
    label: str = ""
    values: np.ndarray

    def field(self) -> GridField:
        return GridField(self.grid, self.values, description=self.label or "checkpoint")


class CheckpointStore:
    """
    Файловое хранилище сеточных полей: бинарный файл с заголовком GridSpec
    и значениями в порядке row-major плюс JSON-файл с параметрами весов.
    """

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else None

    def _resolve(self, path: Path) -> Path:
        path = Path(path)
        if self.root is not None and not path.is_absolute():
            path = self.root / path
        return path

    @staticmethod
    def sidecar(path: Path) -> Path:
        return Path(path).with_suffix(".json")

    def save(
        self,
        path: Path,
        grid: GridSpec,
        values: np.ndarray,
        weights: Optional[WeightParams] = None,
        label: str = "",
    ) -> Path:
        """
        Запись сеточного поля.

        Args:
            path: путь к бинарному файлу
            grid: сетка поля
            values: значения в узлах, размер grid.size
            weights: параметры весов для JSON-файла
            label: подпись среза

        Returns:
            Path: путь к записанному бинарному файлу
        """
        values = np.ascontiguousarray(values, dtype="<f8").ravel()
        if values.size != grid.size:
            raise ValueError(f"Размер данных {values.size} не совпадает с размером сетки {grid.size}")
        path = self._resolve(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = np.array([grid.x_max, grid.v_max], dtype=HEADER_REALS).tobytes()
        header += np.array([grid.n_x, grid.n_v, LAYOUT_CODES[grid.layout]], dtype=HEADER_INTS).tobytes()
        path.write_bytes(header + values.tobytes())
        meta = {"label": label, "weights": weights.model_dump() if weights is not None else None}
        self.sidecar(path).write_text(json.dumps(meta, sort_keys=True, indent=2))
        logger.debug(f"Срез записан: {path}")
        return path

    def load(self, path: Path) -> Checkpoint:
        """
        Чтение сеточного поля.

        Raises:
            ValueError: если файл поврежден или размер не совпадает с заголовком
        """
        path = self._resolve(path)
        raw = path.read_bytes()
        if len(raw) < HEADER_SIZE:
            raise ValueError(f"Файл {path} короче заголовка")
        x_max, v_max = np.frombuffer(raw, dtype=HEADER_REALS, count=2)
        n_x, n_v, code = np.frombuffer(raw, dtype=HEADER_INTS, count=3, offset=2 * HEADER_REALS.itemsize)
        layouts = {value: key for key, value in LAYOUT_CODES.items()}
        if int(code) not in layouts:
            raise ValueError(f"Неизвестный код раскладки {int(code)} в {path}")
        grid = GridSpec(x_max=float(x_max), v_max=float(v_max), n_x=int(n_x), n_v=int(n_v), layout=layouts[int(code)])
        values = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).astype(float)
        if values.size != grid.size:
            raise ValueError(f"Файл {path}: ожидалось {grid.size} значений, найдено {values.size}")
        weights, label = None, ""
        sidecar = self.sidecar(path)
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
            label = meta.get("label", "")
            if meta.get("weights") is not None:
                weights = WeightParams.model_validate(meta["weights"])
        return Checkpoint(grid=grid, weights=weights, label=label, values=values)
