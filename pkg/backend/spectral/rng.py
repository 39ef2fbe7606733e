"""
Reproducible random streams.

Every sample path owns a Philox counter-based generator keyed by
``(path << 64) | seed``, so a path's draws depend only on the seed and the
path index and never on how paths are distributed over workers.
"""
import logging

import numpy as np

from . import conf
from .exceptions import SeedStreamExhausted

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64


def check_stream(seed, n_paths):
    if not 0 <= int(seed) < SEED_LIMIT:
        raise SeedStreamExhausted(f"seed {seed} lies outside [0, 2^64)")
    capacity = conf.setting("SPECTRAL_MAX_PATHS_PER_SEED", 2 ** 32)
    if n_paths > capacity:
        raise SeedStreamExhausted(f"{n_paths} paths exceed the {capacity} streams available per seed")


def path_generator(seed, path):
    return np.random.Generator(np.random.Philox(key=(int(path) << 64) | int(seed)))


def path_normals(seed, start, stop, shape):
    """Standard normal draws of ``shape`` for each path in [start, stop), stacked along axis 0."""
    return np.stack([path_generator(seed, path).standard_normal(shape) for path in range(start, stop)])
