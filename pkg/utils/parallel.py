import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from config.settings import SMALLNOISE_JOBS

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Worker cap: explicit value, then SMALLNOISE_JOBS, then the CPU count"""
    if jobs is not None and jobs > 0:
        return int(jobs)
    if SMALLNOISE_JOBS:
        return int(SMALLNOISE_JOBS)
    return os.cpu_count() or 1


def chunked(items: Sequence[T], size: int) -> List[Sequence[T]]:
    return [items[start:start + size] for start in range(0, len(items), size)]


def map_ordered(func: Callable[[T], R], items: Sequence[T], jobs: Optional[int] = None) -> List[R]:
    """Apply func to every item on a thread pool and return results in input order"""
    workers = min(resolve_jobs(jobs), max(len(items), 1))
    if workers == 1:
        return [func(item) for item in items]
    logger.debug(f"Dispatching {len(items)} work items to {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))
