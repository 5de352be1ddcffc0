"""Replica fan-out over a thread pool."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from nearcrit.config import THREADS
from nearcrit.services.seeding import REPLICA, make_rng

logger = logging.getLogger(__name__)

T = TypeVar("T")

_threads = THREADS


def set_threads(threads: int) -> None:
    """Set the default worker count used by ``run_replicas``."""
    global _threads
    if threads < 1:
        raise ValueError("threads must be at least 1")
    _threads = threads
    logger.debug(f"Replica worker count set to {threads}")


def get_threads() -> int:
    return _threads


def run_replicas(
    fn: Callable[[np.random.Generator], T],
    n: int,
    seed: int,
    stream: Sequence[int] = (REPLICA,),
    start: int = 0,
    threads: Optional[int] = None,
) -> List[T]:
    """
    Evaluate ``fn`` on replicas ``start .. start+n-1``.

    Replica ``r`` receives ``make_rng(seed, *stream, r)``, so results depend on
    (seed, stream, r) only. The returned list is in replica order whatever the
    number of workers.
    """
    workers = threads or _threads
    keys = [tuple(stream) + (r,) for r in range(start, start + n)]

    def one(key):
        return fn(make_rng(seed, *key))

    if workers <= 1 or n <= 1:
        return [one(key) for key in keys]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, keys))


def count_events(
    event: Callable[[np.random.Generator], bool],
    n: int,
    seed: int,
    stream: Sequence[int] = (REPLICA,),
    start: int = 0,
    threads: Optional[int] = None,
) -> int:
    """Number of replicas on which ``event`` holds."""
    return int(sum(bool(x) for x in run_replicas(event, n, seed, stream, start, threads)))
