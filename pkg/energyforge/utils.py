import logging
from concurrent.futures import ThreadPoolExecutor
from logging import Logger
from typing import Callable, List, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def get_logger(name: str) -> Logger:
    logger = logging.getLogger(name)
    logger.setLevel(logging.INFO)
    if not logger.handlers:
        ch = logging.StreamHandler()
        ch.setLevel(logging.INFO)
        formatter = logging.Formatter('%(asctime)s [%(levelname)s] %(message)s')
        ch.setFormatter(formatter)
        logger.addHandler(ch)
    logger.propagate = False
    return logger


logger = get_logger("energyforge")


def chunk_slices(count: int, chunk: int) -> List[slice]:
    """Split range(count) into consecutive slices of at most `chunk` items.

    The partition depends only on `count` and `chunk`, never on the worker
    count, so chunked batch computations give identical results for any
    number of threads.
    """
    return [slice(start, min(start + chunk, count)) for start in range(0, count, chunk)]


def parallel_map(fn: Callable[[slice], T], slices: Sequence[slice], workers: int) -> List[T]:
    """Apply fn to every slice, in order, using at most `workers` threads."""
    if workers <= 1 or len(slices) <= 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))


def stack_chunks(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=0)
