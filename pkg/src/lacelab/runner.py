"""Deterministic seeding and replica orchestration.

Replica ``r`` of a run with master seed ``s`` draws from
``Philox(SeedSequence(s, spawn_key=(r,)))``.  Streams for distinct replica
indices never overlap, and a replica's stream does not depend on which worker
ran it.  Replicas are grouped into fixed-size blocks; per-block partial
results are reduced in block order, so the outcome is independent of the
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 64


def replica_seed(master: int, replica: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(int(replica), *map(int, extra)))


def replica_rng(master: int, replica: int, *extra: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(replica_seed(master, replica, *extra)))


def default_workers() -> int:
    env = os.environ.get("LACELAB_WORKERS")
    return max(1, int(env)) if env else 1


def blocks(replicas: int, block_size: int = BLOCK_SIZE) -> list[range]:
    return [range(lo, min(lo + block_size, replicas)) for lo in range(0, replicas, block_size)]


def map_blocks(func: Callable, args: Sequence, replicas: int, workers: int | None = None,
               block_size: int = BLOCK_SIZE) -> list:
    """Run ``func(*args, block)`` for every replica block; results in block order.

    ``func`` must be a module-level function so it can be pickled.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    todo = blocks(replicas, block_size)
    if workers == 1 or len(todo) <= 1:
        return [func(*args, blk) for blk in todo]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, *args, blk) for blk in todo]
        return [f.result() for f in futures]
