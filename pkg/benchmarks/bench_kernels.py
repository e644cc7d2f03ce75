#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the pure-numpy fallback.

Times the isolated hot kernels (two-site gate application, truncated SVD,
QR shift) over a range of bond dimensions, then a full TEBD run with each
backend.  Run after an editable install:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np

import tnsim.kernels as kernels
from tnsim.kernels import pure
from tnsim._threads import single_threaded_blas

try:
    from tnsim.kernels import _core
except ImportError:
    _core = None


def _rand(rng, shape):
    return np.ascontiguousarray(
        rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    )


def _time(fn, *args, budget=0.4):
    fn(*args)  # warm up
    start = time.perf_counter()
    calls = 0
    while time.perf_counter() - start < budget:
        fn(*args)
        calls += 1
    return (time.perf_counter() - start) / calls


def bench_kernels():
    rng = np.random.default_rng(0)
    gate = np.linalg.qr(_rand(rng, (4, 4)))[0].reshape(2, 2, 2, 2)
    print(f"{'kernel':<26}{'shape':<16}{'pure':>12}{'compiled':>12}{'speedup':>9}")
    for chi in (2, 4, 8, 16, 32, 64):
        a1 = _rand(rng, (chi, 2, chi))
        a2 = _rand(rng, (chi, 2, chi))
        t_pure = _time(pure.apply_two_site, a1, a2, gate, chi, 0.0, True)
        row = f"{'apply_two_site':<26}{f'chi={chi}':<16}{t_pure * 1e6:>10.1f}us"
        if _core is not None:
            t_core = _time(_core.apply_two_site, a1, a2, gate, chi, 0.0, True)
            row += f"{t_core * 1e6:>10.1f}us{t_pure / t_core:>9.2f}"
        print(row)
    for shape in ((8, 8), (32, 64), (128, 128)):
        mat = _rand(rng, shape)
        t_pure = _time(pure.truncated_svd_matrix, mat, 64, 0.0, True)
        row = f"{'truncated_svd_matrix':<26}{str(shape):<16}{t_pure * 1e6:>10.1f}us"
        if _core is not None:
            t_core = _time(_core.truncated_svd_matrix, mat, 64, 0.0, True)
            row += f"{t_core * 1e6:>10.1f}us{t_pure / t_core:>9.2f}"
        print(row)
    for shape in ((16, 8), (64, 32), (256, 128)):
        mat = _rand(rng, shape)
        t_pure = _time(pure.qr_reduced, mat)
        row = f"{'qr_reduced':<26}{str(shape):<16}{t_pure * 1e6:>10.1f}us"
        if _core is not None:
            t_core = _time(_core.qr_reduced, mat)
            row += f"{t_core * 1e6:>10.1f}us{t_pure / t_core:>9.2f}"
        print(row)


def bench_tebd(num_qubits, num_layers):
    from tnsim.circuit import generate_random_structured
    from tnsim.mps import Mps
    from tnsim.tebd import TebdConfig, run_tebd
    from tnsim.tensor import TruncationPolicy

    circuit = generate_random_structured(num_qubits, num_layers, "nonclifford", 0)
    impls = [("pure", pure)] + ([("compiled", _core)] if _core is not None else [])
    print(f"\nTEBD, {num_qubits} qubits x {num_layers} layers, chi_max=64:")
    saved = (
        kernels.apply_two_site,
        kernels.truncated_svd_matrix,
        kernels.qr_reduced,
        kernels.rq_reduced,
    )
    try:
        for name, impl in impls:
            kernels.apply_two_site = impl.apply_two_site
            kernels.truncated_svd_matrix = impl.truncated_svd_matrix
            kernels.qr_reduced = impl.qr_reduced
            kernels.rq_reduced = impl.rq_reduced
            best = None
            for _ in range(3):
                start = time.perf_counter()
                run_tebd(
                    circuit,
                    Mps.from_product_state([0] * num_qubits),
                    TebdConfig(TruncationPolicy(chi_max=64)),
                )
                elapsed = time.perf_counter() - start
                best = elapsed if best is None else min(best, elapsed)
            print(f"  {name:<10} {best:.3f} s")
    finally:
        (
            kernels.apply_two_site,
            kernels.truncated_svd_matrix,
            kernels.qr_reduced,
            kernels.rq_reduced,
        ) = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--qubits", type=int, default=16)
    parser.add_argument("--layers", type=int, default=24)
    args = parser.parse_args()
    if _core is None:
        print("compiled core not built; showing pure-numpy timings only")
    print(f"active backend: {kernels.BACKEND}\n")
    with single_threaded_blas():
        bench_kernels()
        bench_tebd(args.qubits, args.layers)


if __name__ == "__main__":
    main()
