"""Deterministic parallel random streams.

Every chunk of samples owns a Philox stream keyed by ``(seed, chunk index)``
and chunks have a fixed size, so the values drawn for sample ``i`` do not
depend on how many worker threads run the chunks.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

DEFAULT_CHUNK = 1 << 16


def stream(seed: int, index: int, salt: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(salt), int(index)])))


def chunk_bounds(n: int, chunk: int = DEFAULT_CHUNK):
    return [(s, min(n, s + chunk)) for s in range(0, n, chunk)]


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def map_chunks(fn: Callable, n: int, seed: int, chunk: int = DEFAULT_CHUNK, threads: int = 1,
               salt: int = 0) -> list:
    """Run ``fn(rng, start, stop)`` on every chunk; results in chunk order."""
    bounds = chunk_bounds(n, chunk)
    tasks = [(stream(seed, c, salt), s, e) for c, (s, e) in enumerate(bounds)]
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda t: fn(*t), tasks))


def uniform_points(seed: int, n: int, chunk: int = DEFAULT_CHUNK, salt: int = 0,
                   corner=(0.0, 0.0), side: float = 1.0):
    """``n`` uniform points in the square ``corner + [0, side)^2``."""
    parts = map_chunks(lambda rng, s, e: rng.random((e - s, 2)), n, seed, chunk, 1, salt)
    pts = np.concatenate(parts) if parts else np.zeros((0, 2))
    x = corner[0] + side * pts[:, 0]
    y = corner[1] + side * pts[:, 1]
    return x - np.floor(x), y - np.floor(y)
