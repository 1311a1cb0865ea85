"""Seeded random streams.

Every random quantity in permlab is drawn from numpy's ``PCG64`` bit
generator seeded through ``numpy.random.SeedSequence``.  Work that may be
split across threads is cut into fixed-size chunks and chunk ``i`` always
uses the stream ``SeedSequence(seed, spawn_key=(tag, i))``, so results do not
depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

DEFAULT_SEED = 20160607
CHUNK = 10_000

T = TypeVar("T")


def make_rng(seed, *key: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and an optional spawn key."""
    if isinstance(seed, np.random.Generator):
        if key:
            raise TypeError("a Generator cannot be re-keyed")
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def run_chunks(fn: Callable[[int, int], T], total: int, threads: int = 1,
               chunk: int = CHUNK) -> list[T]:
    """Call ``fn(chunk_index, size)`` for every chunk, in chunk order."""
    jobs = list(enumerate(chunk_sizes(total, chunk)))
    return parallel_map(lambda job: fn(*job), jobs, threads)


def parallel_map(fn: Callable[..., T], items: Iterable, threads: int = 1) -> list[T]:
    items: Sequence = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
