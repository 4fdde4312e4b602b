import zlib

import numpy as np


def derive_seed(seed: int, name: str) -> np.random.SeedSequence:
    """
    Детерминированная последовательность зерен для именованной задачи.
    Имя хэшируется через crc32, поэтому не зависит от PYTHONHASHSEED.
    """
    return np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))])


def derive_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, name))
