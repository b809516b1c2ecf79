"""Single-threaded BLAS for bitwise-reproducible runs.

Multi-threaded matmul may split reductions differently from run to run;
pinning every BLAS/OpenMP pool to one thread fixes the summation order.
"""

import contextlib

from threadpoolctl import threadpool_limits


@contextlib.contextmanager
def deterministic(enabled: bool = True):
    if not enabled:
        yield
        return
    with threadpool_limits(limits=1):
        yield
