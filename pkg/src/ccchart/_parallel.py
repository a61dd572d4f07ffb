from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """Thread cap from ``CCCHART_THREADS``, defaulting to the CPU count."""
    raw = os.environ.get("CCCHART_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(func: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Order-preserving map; numpy kernels release the GIL so threads help."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
