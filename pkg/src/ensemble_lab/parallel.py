"""Seed splitting and worker pools.

Work is cut into fixed-size chunks before any worker sees it, and chunk
``k`` always draws from ``SeedSequence(seed, spawn_key=(k,))``.  Results are
therefore identical for every worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 16384
ENV_THREADS = "ENSEMBLE_LAB_THREADS"

__all__ = ["CHUNK", "worker_count", "chunk_sizes", "chunk_rng", "map_ordered"]


def worker_count(requested=None):
    """Number of workers, capped by ``ENSEMBLE_LAB_THREADS`` when set."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(ENV_THREADS)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, int(n))


def chunk_sizes(total, chunk=CHUNK):
    full, rest = divmod(int(total), chunk)
    return [chunk] * full + ([rest] if rest else [])


def chunk_rng(seed, k, stream=0):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(k))))


def map_ordered(fn, items, workers=None):
    """``[fn(x) for x in items]`` evaluated on a thread pool, in input order."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
