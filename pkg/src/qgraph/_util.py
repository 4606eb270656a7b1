"""Small shared runtime helpers."""

from __future__ import annotations

import os


def worker_count() -> int:
    """Worker cap for parallel sections; QG_THREADS overrides machine parallelism."""
    env = os.environ.get("QG_THREADS")
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1
