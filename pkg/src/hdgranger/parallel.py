"""Ordered map over independent work items, optionally across processes.

Results always come back in submission order, and each item carries its own
derived random stream, so a parallel run is bit-identical to a serial one.
"""

from __future__ import annotations


def parallel_map(fn, items, jobs: int = 1) -> list:
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=jobs)(delayed(fn)(item) for item in items)
