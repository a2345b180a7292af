"""Deterministic random-stream derivation.

All Monte Carlo code derives per-unit generators from a single master seed
and an integer index. Streams are independent of execution order and worker
count, which is what makes reruns byte-identical.
"""

from __future__ import annotations

import numpy as np


def spawn_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``master_seed``.

    The same (seed, key) pair always yields the same stream, regardless of
    how many other streams were created before it.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.default_rng(ss)
