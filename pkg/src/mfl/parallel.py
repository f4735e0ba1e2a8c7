"""Replication-level parallelism with schedule-independent output order."""
import os
from concurrent.futures import ThreadPoolExecutor


def default_threads():
    try:
        return max(1, int(os.environ.get("MFL_THREADS", "1")))
    except ValueError:
        return 1


def map_reps(func, count, threads=None):
    """``[func(r) for r in range(count)]``, evaluated on ``threads`` worker threads."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or count <= 1:
        return [func(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(count)))
