"""BLAS thread pinning for engine runs.

Engine runs are single-threaded by design; the tensors involved are far
too small for multithreaded BLAS to pay off, and numpy and scipy each ship
their own OpenBLAS pool whose spin-waiting threads degrade small-matrix
workloads badly when both are active.  Engines wrap their hot section in
:func:`single_threaded_blas`; parallelism belongs at the sample/cell level.
"""

from __future__ import annotations

import contextlib

try:
    from threadpoolctl import threadpool_limits

    def single_threaded_blas():
        return threadpool_limits(limits=1, user_api="blas")

except ImportError:  # pragma: no cover - threadpoolctl is a declared dep

    def single_threaded_blas():
        return contextlib.nullcontext()
