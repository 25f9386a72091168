"""Order-preserving worker pool for independent per-point computations."""
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

from utils.settings import RuntimeSettings

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Apply ``func`` to every item, possibly concurrently.

    Results come back in input order, so the output does not depend on the
    number of workers. ``workers`` defaults to ``RuntimeSettings().worker_count()``.
    """
    items = list(items)
    if workers is None:
        workers = RuntimeSettings().worker_count()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(func, items))
