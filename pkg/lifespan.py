from contextlib import contextmanager
from typing import Iterator

from config.run_config import RunConfig
from runtime.pool import WorkerPool, pool_lifespan


@contextmanager
def global_lifespan(run_config: RunConfig) -> Iterator[WorkerPool]:
    """
    Глобальный контекстный менеджер для управления жизненным циклом
    ресурсов команды. Вызывает контекстные менеджеры отдельных
    компонентов; сейчас это только пул потоков.
    """
    with pool_lifespan(run_config.run.workers) as pool:
        yield pool
