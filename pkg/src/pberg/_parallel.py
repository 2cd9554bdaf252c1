import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(threads=None) -> int:
    if threads is None:
        threads = int(os.environ.get("PBERG_THREADS", "1") or 1)
    return max(1, int(threads))


def pmap(fn, items, threads=None):
    """Order-preserving map; independent tasks run on a thread pool when threads > 1."""
    items = list(items)
    n = thread_count(threads)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
