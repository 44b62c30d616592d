"""Row-chunked parallel map with results independent of the worker count.

Work is always split into the same fixed-size row chunks; workers only change
who computes a chunk, never how. Callers reduce chunk results in chunk order.
BLAS should be pinned to one thread (see ``blas_single_thread``) when
bit-identical results across worker counts are required.
"""

from __future__ import annotations

import contextlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, List, TypeVar

from threadpoolctl import threadpool_limits

T = TypeVar("T")

CHUNK_ROWS = 8192
ENV_THREADS = "PROFILER_THREADS"

_threads: int | None = None


def set_threads(n: int | None) -> None:
    global _threads
    if n is not None and n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _threads = n


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def chunk_slices(n: int, size: int = CHUNK_ROWS) -> List[slice]:
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def map_chunks(fn: Callable[[slice], T], n: int, size: int = CHUNK_ROWS) -> List[T]:
    """Apply ``fn`` to every row chunk of ``range(n)``; results in chunk order."""
    slices = chunk_slices(n, size)
    workers = min(get_threads(), len(slices))
    if workers <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))


@contextlib.contextmanager
def blas_single_thread() -> Iterator[None]:
    with threadpool_limits(limits=1, user_api="blas"):
        yield
