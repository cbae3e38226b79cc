"""Ordered thread-pool map with a process-wide worker cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_max_workers: int | None = None


def set_max_workers(n: int | None) -> None:
    global _max_workers
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _max_workers = n


def max_workers() -> int:
    return _max_workers or os.cpu_count() or 1


def pmap(fn, items) -> list:
    """``[fn(x) for x in items]`` evaluated concurrently; result order is input order."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
