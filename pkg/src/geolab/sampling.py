"""Seeded sampling and order-preserving parallel maps.

Each sample index gets its own generator ``default_rng([seed, index])`` so
that results never depend on evaluation order or thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Mapping, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_SAMPLES = 32
DEFAULT_SEED = 0


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def sample_box(
    box: Mapping[str, tuple[float, float]],
    coords: Sequence[str],
    count: int,
    seed: int = DEFAULT_SEED,
) -> list[dict[str, float]]:
    """Uniform points in an axis-aligned box, one generator per index."""
    points = []
    for i in range(count):
        rng = sample_rng(seed, i)
        point = {}
        for c in coords:
            lo, hi = box[c]
            point[c] = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        points.append(point)
    return points


def thread_count() -> int:
    raw = os.environ.get("GEOLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Map ``fn`` over ``items``; results come back in input order.

    Parallelism is capped by ``GEOLAB_THREADS`` (default 1).
    """
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
