"""Finite-fidelity matrix-product-state simulation of quantum circuits.

Engines: layer-by-layer TEBD, cluster-TEBD (exact multi-layer contraction of
entanglement clusters), and DMRG with a dynamical adaptive qubit-grouping
routine; plus a random-structured circuit generator, an order-finding
circuit builder for factoring, and a brute-force statevector oracle.
"""

from .kernels import BACKEND as kernel_backend
from .tensor import SvdResult, TruncationPolicy, contract, qr, svd_truncated
from .mps import FidelityLedger, Mps, decompose_dense, overlap
from .circuit import (
    Circuit,
    Gate,
    assign_layers,
    gate_matrix,
    generate_random_structured,
    read_circuit,
    write_circuit,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "TruncationPolicy",
    "SvdResult",
    "contract",
    "svd_truncated",
    "qr",
    "Mps",
    "FidelityLedger",
    "overlap",
    "decompose_dense",
    "Circuit",
    "Gate",
    "assign_layers",
    "gate_matrix",
    "generate_random_structured",
    "read_circuit",
    "write_circuit",
    "__version__",
]
