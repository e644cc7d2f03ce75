"""Brute-force dense statevector simulator used as ground truth in tests.

Deliberately simple: every gate is applied by direct tensor contraction on
the full 2^N amplitude array, with no approximation.  Qubit 0 is the most
significant bit, matching :mod:`tnsim.mps`.  The default cap of 20 qubits
(16 MB of amplitudes) can be overridden with the ``TNSIM_ORACLE_CAP``
environment variable.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, gate_matrix
from .errors import LengthMismatch, TooLarge
from .mps import Mps

DEFAULT_CAP = 20


def qubit_cap() -> int:
    return int(os.environ.get("TNSIM_ORACLE_CAP", DEFAULT_CAP))


@dataclass
class Statevector:
    """Dense state: ``amplitudes[i]`` is the coefficient of basis state i."""

    n_qubits: int
    amplitudes: np.ndarray

    def fidelity_with(self, other: "Statevector") -> float:
        if self.n_qubits != other.n_qubits:
            raise LengthMismatch(f"{self.n_qubits} vs {other.n_qubits} qubits")
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


def _check_cap(n_qubits: int) -> None:
    cap = qubit_cap()
    if n_qubits > cap:
        raise TooLarge(f"{n_qubits} qubits exceeds the dense oracle cap of {cap}")


def apply_gate_dense(
    state: np.ndarray, n_qubits: int, matrix: np.ndarray, qubits: Sequence[int]
) -> np.ndarray:
    """Apply a k-qubit gate on arbitrary (not necessarily adjacent) qubits."""
    k = len(qubits)
    tensor = state.reshape((2,) * n_qubits)
    gate = matrix.reshape((2,) * (2 * k))
    moved = np.tensordot(gate, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    # tensordot puts the gate's output axes first; restore qubit positions.
    moved = np.moveaxis(moved, list(range(k)), list(qubits))
    return np.ascontiguousarray(moved).reshape(-1)


def simulate_dense(circuit: Circuit, initial_bits: Sequence[int]) -> Statevector:
    """Evolve |initial_bits> through the circuit in layer order."""
    n = circuit.num_qubits
    if len(initial_bits) != n:
        raise LengthMismatch(f"{len(initial_bits)} bits for {n} qubits")
    _check_cap(n)
    state = np.zeros(2**n, dtype=np.complex128)
    index = 0
    for bit in initial_bits:
        index = (index << 1) | int(bit)
    state[index] = 1.0
    for layer in circuit.gates_by_layer():
        for gate in layer:
            state = apply_gate_dense(
                state, n, gate_matrix(gate.name, gate.params), gate.qubits
            )
    return Statevector(n_qubits=n, amplitudes=state)


def exact_fidelity(mps: Mps, reference: Statevector) -> float:
    """|<reference | mps>|^2 against the dense ground truth."""
    if mps.num_sites != reference.n_qubits:
        raise LengthMismatch(f"{mps.num_sites} vs {reference.n_qubits} qubits")
    _check_cap(reference.n_qubits)
    dense = mps.to_statevector()
    return float(abs(np.vdot(reference.amplitudes, dense)) ** 2)
