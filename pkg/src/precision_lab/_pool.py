"""Deterministic worker pool for independent numeric tasks.

Thread based (the heavy lifting is in numpy, which releases the GIL) and
order preserving, so results are identical whatever the pool size.  The
PRECISION_LAB_THREADS environment variable caps the pool; an explicit
argument wins over it.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "PRECISION_LAB_THREADS"


def worker_count(requested: int | None = None) -> int:
    if requested is not None and requested > 0:
        return int(requested)
    env = os.environ.get(ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn, items, workers: int | None = None) -> list:
    """Apply fn to every item, collecting results in input order."""
    items = list(items)
    n = worker_count(workers)
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
