"""Seed splitting, deterministic parallel map, and atomic file output.

Splitting rule: a task list of length T drawn from a generator ``rng`` gets
child generators ``rng.spawn(T)`` (SeedSequence children, in task order).
Tasks are then scheduled on any number of workers, and results are gathered
back in task order, so outputs never depend on the worker count.
"""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def split(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    return rng.spawn(count)


def pmap(fn, items, workers: int = 1) -> list:
    """Ordered map; runs on a thread pool when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def blocks(total: int, size: int) -> list[int]:
    """Fixed block decomposition of ``total`` tasks (independent of workers)."""
    out = [size] * (total // size)
    if total % size:
        out.append(total % size)
    return out


def atomic_write(path, data: bytes | str) -> None:
    """Write-then-rename so readers never observe a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
