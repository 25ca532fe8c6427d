"""Row-partitioned batch execution with deterministic output.

Rows are cut into fixed-size chunks aligned to absolute row indices, so the
arithmetic applied to any given row does not depend on the thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK_ROWS = 512


def default_threads() -> int:
    env = os.environ.get("SELGEN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_rows(fn, rows: np.ndarray, threads: int | None = None, chunk: int = CHUNK_ROWS) -> np.ndarray:
    """Apply ``fn`` (rows -> 1-D array) chunk by chunk and concatenate."""
    n = rows.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    bounds = [(s, min(s + chunk, n)) for s in range(0, n, chunk)]
    threads = default_threads() if threads is None else max(1, int(threads))

    def run(span):
        s, e = span
        out[s:e] = fn(rows[s:e])

    if threads == 1 or len(bounds) == 1:
        for span in bounds:
            run(span)
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(bounds))) as pool:
            list(pool.map(run, bounds))
    return out
