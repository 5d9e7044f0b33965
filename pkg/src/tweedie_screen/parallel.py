"""Deterministic row-parallel mapping.

Rows are independent; results are returned in input order regardless of
scheduling, so the worker count never affects output bytes.  The worker
count comes from TWEEDIE_SCREEN_THREADS, defaulting to cores - 2.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_THREADS = "TWEEDIE_SCREEN_THREADS"


def worker_count() -> int:
    env = os.environ.get(ENV_THREADS)
    if env:
        return max(1, int(env))
    return max(1, (os.cpu_count() or 1) - 2)


def ordered_map(fn, items, workers: int | None = None) -> list:
    """Map a picklable callable over items, preserving order."""
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
