from .pool import PoolStore, WorkerPool, get_worker_pool, pool_lifespan
from .seeding import derive_rng, derive_seed

__all__ = ["PoolStore", "WorkerPool", "get_worker_pool", "pool_lifespan", "derive_rng", "derive_seed"]
