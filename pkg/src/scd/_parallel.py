"""Deterministic chunked work splitting.

Chunk boundaries depend only on the item count, never on the worker count,
so partial results combine identically whether run serially or on a pool.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

DEFAULT_CHUNK = 4096


def resolve_threads(threads: int) -> int:
    if threads == 0:
        return os.cpu_count() or 1
    return max(1, threads)


def chunk_bounds(n_items: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, n_items)) for s in range(0, n_items, chunk)]


def run_chunked(fn, n_items: int, threads: int = 1, chunk: int = DEFAULT_CHUNK) -> list:
    """Apply fn(start, stop) over fixed chunks; results in chunk order."""
    bounds = chunk_bounds(n_items, chunk)
    workers = resolve_threads(threads)
    if workers == 1 or len(bounds) <= 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, s, e) for s, e in bounds]
        return [f.result() for f in futures]
