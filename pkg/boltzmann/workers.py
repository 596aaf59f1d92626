"""
boltzmann/workers.py
────────────────────
Ordered thread-pool map.

Callers always split work into chunks whose boundaries do not depend on the
thread count, and reduce the returned list left to right.  That keeps every
result bit-identical between --threads 1 and --threads N.  numpy releases
the GIL inside its kernels, so threads give real overlap on the big
enumeration and sampling blocks.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from boltzmann.conf import resolve_threads

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    items   = list(items)
    threads = min(resolve_threads(threads), max(1, len(items)))
    if threads == 1:
        return [fn(item) for item in items]
    logger.debug(f'[WORKERS] {len(items)} chunk(s) on {threads} thread(s)')
    with ThreadPoolExecutor(max_workers=threads, thread_name_prefix='bm-worker') as pool:
        return list(pool.map(fn, items))
