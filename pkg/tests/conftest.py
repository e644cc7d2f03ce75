"""Shared fixtures: a hand-built eight-qubit, seven-layer reference circuit.

The circuit mirrors the worked example used throughout the docs/tests: two
layers of pairwise entanglers, a merge of the two right blocks at layer 3,
in-cluster gates at layer 4, and a central merge at layer 5.  Every layer
touches all eight qubits, so greedy layering fills layers 1..7 exactly.
"""

import pytest

from tnsim.circuit import Circuit, Gate


def _figure_gates():
    gates = []
    # layer 1 and 2: entanglers on (0,1) (2,3) (4,5) (6,7)
    for _ in range(2):
        for q in (0, 2, 4, 6):
            gates.append(Gate("cz", (q, q + 1)))
    # layer 3: merge right blocks with (5,6); singles elsewhere
    gates.append(Gate("cz", (5, 6)))
    for q in (0, 1, 2, 3, 4, 7):
        gates.append(Gate("h", (q,)))
    # layer 4: gates inside existing clusters
    gates.append(Gate("cz", (0, 1)))
    gates.append(Gate("cz", (4, 5)))
    for q in (2, 3, 6, 7):
        gates.append(Gate("h", (q,)))
    # layer 5: central merge (3,4); singles elsewhere
    gates.append(Gate("cz", (3, 4)))
    for q in (0, 1, 2, 5, 6, 7):
        gates.append(Gate("h", (q,)))
    # layer 6
    gates.append(Gate("cz", (2, 3)))
    gates.append(Gate("cz", (5, 6)))
    for q in (0, 1, 4, 7):
        gates.append(Gate("h", (q,)))
    # layer 7
    for q in (0, 2, 4, 6):
        gates.append(Gate("cz", (q, q + 1)))
    return gates


@pytest.fixture(scope="session")
def figure_circuit() -> Circuit:
    circuit = Circuit(8, _figure_gates())
    assert circuit.num_layers == 7
    return circuit
