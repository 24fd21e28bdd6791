"""Order-preserving parallel map used for independent solves."""

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "ENGEL_SPECTRA_THREADS"


def worker_count(requested=None):
    if requested is not None:
        return max(1, int(requested))
    value = os.environ.get(THREADS_ENV)
    if value:
        return max(1, int(value))
    return 1


def ordered_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, possibly on threads; output order is input order.

    The numba kernels release the GIL, so threads give real overlap for
    the eigenvalue solves.  Results are always reduced by the caller in
    list order, which keeps sums bit-identical across thread counts.
    """
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
