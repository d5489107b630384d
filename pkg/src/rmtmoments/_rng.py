"""Seed derivation.

Every random stream in the package is a Philox generator keyed by a
``SeedSequence`` whose spawn key encodes *where* the stream is used, so a
value never depends on the order in which streams are created.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# spawn-key tags
DIAGONAL = 0
OFFDIAG_ROW = 1
REPLICATE = 2
EXPERIMENT = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replicate_seed(master_seed: int, index: int) -> int:
    """64-bit seed of replicate ``index`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(REPLICATE, int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def child_seed(master_seed: int, *key: int) -> int:
    """64-bit seed for an independent sub-experiment ``key`` of ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(EXPERIMENT,) + tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_replicates(
    fn: Callable[[int], T],
    replicates: int,
    master_seed: int,
    threads: int = 1,
) -> list[T]:
    """Evaluate ``fn(seed_i)`` for every replicate, results in replicate order."""
    seeds: Sequence[int] = [replicate_seed(master_seed, i) for i in range(replicates)]
    if threads <= 1:
        return [fn(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, seeds))
