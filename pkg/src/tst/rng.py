"""Seedable, splittable random streams.

Every stochastic component draws from a numpy PCG64 generator derived
from the single master seed plus a structured stream key, so that results
are reproducible bit-for-bit regardless of worker count or scheduling.

Stream key conventions used by the pipeline:

    (0,)             heated seeding chain
    (1, k)           recording chain k
    (2,)             rejection sampler for process start graphs
    (3, kind, t)     dynamic-process trajectory t of process ``kind``
"""

import numpy as np


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for (master_seed, key)."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
