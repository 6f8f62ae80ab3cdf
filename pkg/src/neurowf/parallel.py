import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "NEUROWF_THREADS"


def n_threads():
    """Worker count: ``NEUROWF_THREADS`` if set, else the CPU count."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, min(int(raw), cpus))
        except ValueError:
            pass
    return cpus


def parallel_map(func, items):
    """Order-preserving map over ``items`` using a thread pool when useful."""
    workers = min(n_threads(), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
