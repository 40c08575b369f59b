"""Shard execution for Monte Carlo sweeps.

Work is cut into shards whose seeds depend only on the master seed and the
shard index, and callers reduce results with order-insensitive sums, so the
outcome is identical for any worker count.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")


def map_shards(fn: Callable[[T], R], tasks: Iterable[T], workers: int = 1) -> list[R]:
    """Apply ``fn`` to every task, in-process or on a process pool.

    ``fn`` and the tasks must be picklable when ``workers > 1``.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def sum_counts(results: Sequence[Sequence[int]]) -> list[int]:
    """Elementwise integer sum of per-shard count tuples."""
    return [sum(col) for col in zip(*results)]
