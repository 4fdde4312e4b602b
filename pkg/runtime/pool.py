import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, Optional, TypeVar

from config.settings import settings

logger = logging.getLogger("workbench")

T = TypeVar("T")
R = TypeVar("R")


# Хранилище для пула потоков
class PoolStore:
    executor: Optional[ThreadPoolExecutor] = None
    workers: int = 1

    @classmethod
    def init_pool(cls, workers: int):
        """Создание пула при запуске команды; workers <= 1 означает последовательный режим"""
        cls.workers = max(1, int(workers))
        if cls.workers > 1:
            cls.executor = ThreadPoolExecutor(max_workers=cls.workers, thread_name_prefix="workbench")
        logger.debug(f"Пул инициализирован: workers={cls.workers}")

    @classmethod
    def close_pool(cls):
        """Остановка пула при завершении команды"""
        if cls.executor:
            cls.executor.shutdown(wait=True)
            cls.executor = None
        cls.workers = 1


class WorkerPool:
    """
    Исполнитель блоков работы. Разбиение на блоки не зависит от числа
    потоков, а результаты собираются в порядке блоков, поэтому
    параллельный и последовательный режимы дают одинаковые значения.
    """

    def __init__(self, executor: Optional[ThreadPoolExecutor] = None):
        self.executor = executor

    @property
    def sequential(self) -> bool:
        return self.executor is None

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> list[R]:
        if self.executor is None:
            return [func(item) for item in items]
        return list(self.executor.map(func, items))

    @staticmethod
    def chunks(total: int, size: int) -> list[slice]:
        """Разбиение диапазона [0, total) на срезы длины не больше size"""
        size = max(1, int(size))
        return [slice(start, min(start + size, total)) for start in range(0, total, size)]


def get_worker_pool() -> WorkerPool:
    """Пул текущего процесса; вне lifespan работает последовательно"""
    return WorkerPool(PoolStore.executor)


@contextmanager
def pool_lifespan(workers: Optional[int] = None) -> Iterator[WorkerPool]:
    """
    Контекстный менеджер жизненного цикла пула потоков.

    Пример использования:
        with pool_lifespan(4) as pool:
            values = pool.map(func, items)
    """
    PoolStore.init_pool(settings.WORKERS if workers is None else workers)
    try:
        yield get_worker_pool()
    finally:
        PoolStore.close_pool()
