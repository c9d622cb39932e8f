"""Partitioned sweeps over index ranges with a thread pool."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar('T')


def partition(n: int, workers: int) -> List[Tuple[int, int]]:
    """
    Split range(n) into at most `workers` contiguous half-open ranges.

    Args:
        n: Number of items
        workers: Requested number of chunks

    Returns:
        List of (start, stop) pairs in increasing order
    """
    workers = max(1, int(workers))
    if n <= 0:
        return []
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def parallel_map(fn: Callable[..., T], chunks: Sequence, workers: int = 1) -> List[T]:
    """
    Apply fn to every chunk, returning results in chunk order.

    Runs inline when workers <= 1 or there is a single chunk.
    """
    if workers <= 1 or len(chunks) <= 1:
        return [fn(chunk) for chunk in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def chunked_rows(n: int, workers: int, max_rows: int = 0) -> List[Tuple[int, int]]:
    """Partition n rows for `workers` threads, further split so no chunk exceeds max_rows."""
    ranges = partition(n, workers)
    if max_rows <= 0:
        return ranges
    out = []
    for start, stop in ranges:
        for s in range(start, stop, max_rows):
            out.append((s, min(s + max_rows, stop)))
    return out


def first_argmax(values: np.ndarray) -> int:
    """Index of the first maximum; NaN entries are ignored. Returns -1 for an empty array."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return -1
    masked = np.where(np.isnan(values), -np.inf, values)
    return int(np.argmax(masked))


def merge_max(partials: Sequence[Tuple[float, object]]) -> Tuple[float, object]:
    """
    Combine per-chunk (value, witness) maxima.

    Chunks arrive in index order and ties keep the earlier chunk, so the
    result matches a single sequential sweep.
    """
    best_value, best_witness = -np.inf, None
    for value, witness in partials:
        if witness is not None and value > best_value:
            best_value, best_witness = value, witness
    return best_value, best_witness
