"""Deterministic block decomposition for Monte-Carlo work.

Work is cut into fixed-size blocks whose random streams depend only on
``(seed, stream tag, block index)``.  Blocks run on a thread pool (the
compiled kernels release the GIL) and results come back in block order, so
the output never depends on the number of workers.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

R = TypeVar("R")

BLOCK = 256


def resolve_seed(seed) -> int:
    if seed is None:
        return int(np.random.SeedSequence().entropy)
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return seed


def tag_of(name: str) -> int:
    return zlib.crc32(name.encode())


def block_rng(seed: int, tag: str, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(tag_of(tag), block))))


def split(total: int, block: int = BLOCK) -> list[int]:
    sizes = [block] * (total // block)
    if total % block:
        sizes.append(total % block)
    return sizes


def run_blocks(fn: Callable[[np.random.Generator, int, int], R], total: int, seed: int, tag: str,
               workers: int = 1, block: int = BLOCK) -> list[R]:
    """Call ``fn(rng, block_index, size)`` for every block; results in block order."""
    sizes = split(total, block)
    tasks = [(b, s) for b, s in enumerate(sizes)]

    def one(task):
        b, s = task
        return fn(block_rng(seed, tag, b), b, s)

    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [one(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(one, tasks))
