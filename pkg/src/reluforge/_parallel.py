"""Thread-count policy and deterministic sharded map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    env = os.environ.get("RELUFORGE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"RELUFORGE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("RELUFORGE_THREADS must be at least 1")
        return n
    return os.cpu_count() or 1


def shard_map(fn, items):
    """``[fn(x) for x in items]`` on a thread pool; result order follows ``items``."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
