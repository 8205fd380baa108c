"""
Thread-pool helpers with deterministic result order.

numpy releases the GIL inside its kernels, so row blocks and chunk moments
run concurrently on threads. Results always come back in submission order.
"""

import concurrent.futures
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """
    Apply ``func`` to every item, optionally on a thread pool.

    Args:
        func: Function of one item
        items: Work items
        threads: Worker count; 1 runs inline

    Returns:
        list: Results in the order of ``items``
    """
    if threads <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))


def map_row_blocks(func: Callable[[np.ndarray], np.ndarray], data: np.ndarray,
                   threads: int = 1) -> np.ndarray:
    """
    Apply a row-wise array function block by block and stack the results.

    Args:
        func: Maps an (r, d) block to an (r, k) block
        data: (n, d) input
        threads: Worker count; 1 processes the whole array at once

    Returns:
        np.ndarray: (n, k) output, identical to ``func(data)``
    """
    if threads <= 1 or data.shape[0] < 2:
        return func(data)
    blocks = np.array_split(data, min(threads, data.shape[0]), axis=0)
    return np.vstack(map_ordered(func, blocks, threads))
