"""Deterministic replicate parallelism.

Workers process disjoint replicate indices whose randomness comes from
per-replicate substreams, so outputs are identical for any thread count;
only wall time changes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_ENV_VAR = "STABLE_FIELD_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Explicit argument, else the STABLE_FIELD_THREADS env var, else 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """Order-preserving map; results do not depend on the thread count."""
    n = resolve_threads(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
