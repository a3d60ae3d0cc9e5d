"""
Ordered parallel map over a process pool
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from loguru import logger

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(func: Callable[[T], R], items: Sequence[T], n_workers: int = 1) -> List[R]:
    """map(func, items) preserving input order; runs in-process when n_workers <= 1

    `func` must be picklable (a module-level function or functools.partial of one).
    """
    items = list(items)
    if n_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(n_workers, len(items))
    logger.debug(f"Dispatching {len(items)} tasks to {workers} worker processes")
    chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items, chunksize=chunksize))
