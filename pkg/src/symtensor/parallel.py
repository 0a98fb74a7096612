"""Componentwise simplification, optionally fanned out to worker processes."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .symexpr.assumptions import Assumptions
from .symexpr.simplify import simplify

_pools: dict = {}


def default_workers() -> int:
    return os.cpu_count() or 1


def _pool(workers: int) -> ProcessPoolExecutor:
    pool = _pools.get(workers)
    if pool is None:
        pool = ProcessPoolExecutor(max_workers=workers)
        _pools[workers] = pool
    return pool


def shutdown_pools():
    for pool in _pools.values():
        pool.shutdown(cancel_futures=True)
    _pools.clear()


def _simplify_chunk(args):
    items, assumptions = args
    return [simplify(e, assumptions) for e in items]


def simplify_list(items: list, assumptions: Assumptions, parallel: bool = False,
                  workers: int | None = None) -> list:
    """Simplify a list of expressions, preserving order."""
    workers = workers or default_workers()
    # identical entries (e.g. symmetric partners) are simplified once
    unique = list(dict.fromkeys(items))
    if not parallel or workers < 2 or len(unique) < 2:
        done = [simplify(e, assumptions) for e in unique]
    else:
        n_chunks = min(len(unique), workers * 4)
        chunks = [unique[i::n_chunks] for i in range(n_chunks)]
        results = list(_pool(workers).map(_simplify_chunk, [(c, assumptions) for c in chunks]))
        done = [None] * len(unique)
        for ci, res in enumerate(results):
            for j, r in enumerate(res):
                done[ci + j * n_chunks] = r
    table = dict(zip(unique, done))
    return [table[e] for e in items]


def simplify_array(arr: np.ndarray, assumptions: Assumptions, parallel: bool = False,
                   workers: int | None = None) -> np.ndarray:
    flat = list(arr.reshape(-1))
    out = np.empty(len(flat), dtype=object)
    for i, v in enumerate(simplify_list(flat, assumptions, parallel, workers)):
        out[i] = v
    return out.reshape(arr.shape)


def _noop(x):
    return x


def warm_up(workers: int):
    """Start the worker processes ahead of time so timings exclude startup."""
    if workers >= 2:
        list(_pool(workers).map(_noop, range(workers * 2)))
