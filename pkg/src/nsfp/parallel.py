"""Deterministic block-parallel helpers.

Heavy per-point kernels (stress quadrature, gradient monitors) operate
independently at each spatial grid point, so the x-rows can be split
into contiguous blocks and processed by a thread pool.  Results are
assembled by index and each point's arithmetic is identical regardless
of the block layout, so output is bitwise independent of thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_num_threads = 1


def set_threads(n: int) -> None:
    global _num_threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _num_threads = int(n)


def get_threads() -> int:
    return _num_threads


def hardware_threads() -> int:
    return os.cpu_count() or 1


def map_row_blocks(fn, cube: np.ndarray, out_row_axis: int = 0) -> np.ndarray:
    """Apply fn to contiguous row-blocks of cube (split along axis 0).

    fn maps an (r, nx, nm) block to an array whose axis ``out_row_axis``
    has length r; blocks are concatenated along that axis in order.
    """
    n = _num_threads
    nrows = cube.shape[0]
    if n <= 1 or nrows < 2 * n:
        return fn(cube)
    bounds = np.linspace(0, nrows, n + 1, dtype=int)
    chunks = [cube[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=out_row_axis)
