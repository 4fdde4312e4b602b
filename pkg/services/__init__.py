from typing import Optional

from models.collision import CollisionConfig
from models.solver import SolverConfig
from runtime.pool import WorkerPool, get_worker_pool
from services.boardgame_service import BoardGameService
from services.bounds_service import BoundsService
from services.collision_service import CollisionService
from services.hierarchy_service import HierarchyService
from services.solver_service import SolverService
from storage.checkpoints import CheckpointStore


def get_collision_service(cfg: CollisionConfig, pool: Optional[WorkerPool] = None) -> CollisionService:
    return CollisionService(cfg, pool or get_worker_pool())


def get_solver_service(
    cfg: SolverConfig,
    pool: Optional[WorkerPool] = None,
    checkpoints: Optional[CheckpointStore] = None,
) -> SolverService:
    """
    Фабрика для создания SolverService.

    Args:
        cfg: параметры решателя
        pool: пул потоков; по умолчанию пул текущего lifespan
        checkpoints: хранилище срезов решения

    Returns:
        SolverService: решатель Пикара
    """
    return SolverService(cfg, pool or get_worker_pool(), checkpoints)


def get_bounds_service(seed: int, pool: Optional[WorkerPool] = None, **options) -> BoundsService:
    return BoundsService(pool or get_worker_pool(), seed, **options)


def get_hierarchy_service(cfg: SolverConfig, pool: Optional[WorkerPool] = None) -> HierarchyService:
    return HierarchyService(cfg, pool or get_worker_pool())


def get_boardgame_service(cfg: CollisionConfig, pool: Optional[WorkerPool] = None) -> BoardGameService:
    return BoardGameService(cfg, pool or get_worker_pool())
