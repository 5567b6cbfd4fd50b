"""Worker-pool helper honouring the BETHE_THREADS environment variable."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Number of workers: BETHE_THREADS if set, else the hardware count."""
    raw = os.environ.get("BETHE_THREADS")
    if raw is not None:
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return os.cpu_count() or 1


def parallel_map(fn, items):
    """Order-preserving map over `items`, threaded when workers > 1.

    Callers must keep per-item work independent and deterministic (seed by
    item index, not by shared state) so results do not depend on scheduling.
    """
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
