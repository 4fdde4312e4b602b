from typing import Any, Optional


class WorkbenchError(Exception):
    """
    Базовая ошибка стенда. Несет код завершения для CLI и полезную нагрузку
    для отчета (аналог HTTPException с status_code и detail).
    """
    exit_code: int = 1

    def __init__(self, detail: str, payload: Optional[dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.payload = payload or {}


class ConfigurationError(WorkbenchError):
    """Некорректная конфигурация или нарушение режима теоремы"""
    exit_code = 2


class ContractViolation(WorkbenchError):
    """Проверяемый численный контракт не выполнен"""
    exit_code = 1


class PicardDivergence(WorkbenchError):
    """Итерации Пикара не сошлись за отведенное число шагов"""
    exit_code = 1

    def __init__(self, detail: str, increments: list[float]):
        super().__init__(detail, {"increments": list(increments)})
        self.increments = list(increments)


class CapExceededError(WorkbenchError):
    """Превышен предел перебора или числа шагов"""
    exit_code = 1
