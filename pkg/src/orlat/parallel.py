"""Replica fan-out.  Results are returned in replica order, so serial and
parallel execution aggregate identically."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def map_replicas(fn: Callable, tasks: Iterable, n_tasks: int, jobs: int = 1) -> list:
    if jobs <= 1 or n_tasks < 2:
        results = [fn(t) for t in tasks]
    else:
        chunk = max(1, n_tasks // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, tasks, chunksize=chunk))
    results.sort(key=lambda r: r[0])
    return results
