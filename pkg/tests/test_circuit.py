"""Tests for the gate library, layer assignment, generator, and file format."""

import math

import numpy as np
import pytest

from tnsim.circuit import (
    CLIFFORD_SINGLE,
    CLIFFORD_TWO,
    GATE_DEFS,
    NONCLIFFORD_SINGLE,
    NONCLIFFORD_TWO,
    Circuit,
    Gate,
    adjacent_form,
    assign_layers,
    gate_matrix,
    generate_random_structured,
    read_circuit,
    write_circuit,
)
from tnsim.errors import (
    BadArity,
    NonAdjacentGate,
    ParseError,
    UnknownGate,
    VersionMismatch,
)

PAULIS = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class TestGateMatrices:
    def test_t_gate(self):
        expected = np.diag([1.0, np.exp(1j * math.pi / 4)])
        np.testing.assert_allclose(gate_matrix("t"), expected, atol=1e-15)

    def test_p_zero_is_identity(self):
        np.testing.assert_allclose(gate_matrix("p", (0.0,)), np.eye(2), atol=1e-15)

    def test_sqrt_swap_squares_to_swap(self):
        m = np.asarray(gate_matrix("sswap"))
        np.testing.assert_allclose(m @ m, gate_matrix("swap"), atol=1e-12)

    def test_x_fourth_root_powers_to_x(self):
        m = np.asarray(gate_matrix("x4"))
        np.testing.assert_allclose(
            np.linalg.matrix_power(m, 4), gate_matrix("x"), atol=1e-12
        )

    def test_w_sqrt_squares_to_w(self):
        w = (PAULIS["x"] + PAULIS["y"]) / math.sqrt(2.0)
        m = np.asarray(gate_matrix("sqw"))
        np.testing.assert_allclose(m @ m, w, atol=1e-12)

    def test_all_matrices_unitary(self):
        for name, (nq, nparams, _) in GATE_DEFS.items():
            params = (0.37,) * nparams
            mat = np.asarray(gate_matrix(name, params))
            dim = 2**nq
            err = np.abs(mat.conj().T @ mat - np.eye(dim)).max()
            assert err < 1e-12, f"{name} deviates from unitarity by {err}"

    def test_unknown_and_bad_arity(self):
        with pytest.raises(UnknownGate):
            gate_matrix("nope")
        with pytest.raises(BadArity):
            gate_matrix("p", ())
        with pytest.raises(BadArity):
            gate_matrix("h", (1.0,))

    def test_clifford_gates_map_paulis_to_paulis(self):
        # expand U P U^dag in the Pauli basis; Clifford conjugation leaves
        # exactly one basis element with coefficient of magnitude 1
        singles = [gate_matrix(n) for n in CLIFFORD_SINGLE]
        for u in singles:
            u = np.asarray(u)
            for p in ("x", "y", "z"):
                conj = u @ PAULIS[p] @ u.conj().T
                coeffs = [
                    abs(np.trace(conj @ PAULIS[q]) / 2.0) for q in PAULIS
                ]
                coeffs = sorted(coeffs, reverse=True)
                assert coeffs[0] == pytest.approx(1.0, abs=1e-12)
                assert coeffs[1] == pytest.approx(0.0, abs=1e-12)
        twos = [gate_matrix(n) for n in CLIFFORD_TWO]
        basis2 = {
            (a, b): np.kron(PAULIS[a], PAULIS[b]) for a in PAULIS for b in PAULIS
        }
        generators = [("x", "i"), ("z", "i"), ("i", "x"), ("i", "z")]
        for u in twos:
            u = np.asarray(u)
            for g in generators:
                conj = u @ basis2[g] @ u.conj().T
                coeffs = sorted(
                    (abs(np.trace(conj @ m) / 4.0) for m in basis2.values()),
                    reverse=True,
                )
                assert coeffs[0] == pytest.approx(1.0, abs=1e-12)
                assert coeffs[1] == pytest.approx(0.0, abs=1e-12)


class TestLayerAssignment:
    def test_shared_qubit_forces_new_layer(self):
        c = assign_layers(6, [Gate("cz", (2, 3)), Gate("h", (3,))])
        assert [g.layer for g in c.gates] == [1, 2]

    def test_disjoint_gates_share_layer(self):
        c = assign_layers(6, [Gate("cz", (2, 3)), Gate("h", (4,))])
        assert [g.layer for g in c.gates] == [1, 1]

    def test_appended_gates_open_new_layers(self, figure_circuit):
        gates = list(figure_circuit.gates) + [Gate("cz", (5, 6)), Gate("cz", (6, 7))]
        c = assign_layers(8, gates)
        assert [g.layer for g in c.gates[-2:]] == [8, 9]

    def test_relayering_fixed_point(self, figure_circuit):
        again = assign_layers(figure_circuit.num_qubits, figure_circuit.gates)
        assert [g.layer for g in again.gates] == [g.layer for g in figure_circuit.gates]
        assert again.num_layers == figure_circuit.num_layers

    def test_gates_by_layer_partition(self, figure_circuit):
        seen = set()
        for idx, bucket in enumerate(figure_circuit.gates_by_layer(), start=1):
            qubits: set[int] = set()
            for gate in bucket:
                assert gate.layer == idx
                assert not qubits.intersection(gate.qubits)
                qubits.update(gate.qubits)
                seen.add(id(gate))
        assert len(seen) == len(figure_circuit.gates)


class TestAdjacentForm:
    def test_identity_order(self):
        start, mat = adjacent_form(Gate("cx", (3, 4)))
        assert start == 3
        np.testing.assert_array_equal(mat, gate_matrix("cx"))

    def test_reversed_order_permutes(self):
        start, mat = adjacent_form(Gate("cx", (4, 3)))
        assert start == 3
        # control on the higher qubit: |q3 q4> -> target is q3
        expected = np.zeros((4, 4), dtype=complex)
        expected[0b00, 0b00] = 1
        expected[0b11, 0b01] = 1
        expected[0b10, 0b10] = 1
        expected[0b01, 0b11] = 1
        np.testing.assert_allclose(mat, expected, atol=1e-15)

    def test_non_adjacent_rejected(self):
        with pytest.raises(NonAdjacentGate):
            adjacent_form(Gate("cx", (1, 3)))


class TestGenerator:
    def test_small_circuit_layer_count(self):
        c = generate_random_structured(2, 1, "clifford", seed=0)
        assert c.num_layers == 1
        assert 1 <= len(c.gates) <= 2

    def test_deterministic(self, tmp_path):
        a = generate_random_structured(12, 9, "nonclifford", seed=77)
        b = generate_random_structured(12, 9, "nonclifford", seed=77)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        write_circuit(a, str(pa))
        write_circuit(b, str(pb))
        assert pa.read_bytes() == pb.read_bytes()

    def test_layers_exactly_filled(self):
        for seed in range(4):
            c = generate_random_structured(9, 7, "clifford", seed=seed)
            assert c.num_layers == 7
            last = [0] * 9
            for g in c.gates:
                for q in g.qubits:
                    last[q] = g.layer
            assert all(v == 7 for v in last)

    def test_only_adjacent_pairs(self):
        c = generate_random_structured(15, 10, "nonclifford", seed=5)
        for g in c.gates:
            if g.num_qubits == 2:
                assert abs(g.qubits[0] - g.qubits[1]) == 1

    def test_two_qubit_fraction(self):
        total = 0
        twos = 0
        for seed in range(20):
            c = generate_random_structured(40, 40, "clifford", seed=seed)
            total += len(c.gates)
            twos += sum(1 for g in c.gates if g.num_qubits == 2)
        fraction = twos / total
        assert abs(fraction - 0.5) <= 0.05

    def test_family_gate_sets(self):
        c = generate_random_structured(10, 8, "clifford", seed=2)
        names = {g.name for g in c.gates}
        assert names <= set(CLIFFORD_SINGLE) | set(CLIFFORD_TWO)
        c2 = generate_random_structured(10, 30, "nonclifford", seed=2)
        names2 = {g.name for g in c2.gates}
        assert names2 <= set(NONCLIFFORD_SINGLE) | set(NONCLIFFORD_TWO)
        assert names2 - names, "non-Clifford family should draw extra gates"


class TestCircuitFile:
    def test_round_trip(self, tmp_path):
        c = generate_random_structured(8, 6, "nonclifford", seed=3)
        path = tmp_path / "circ.json"
        write_circuit(c, str(path))
        back = read_circuit(str(path))
        assert back == c
        assert back.num_layers == c.num_layers

    def test_unknown_gate_name(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            '{"version":1,"num_qubits":2,"gates":[{"name":"warp","qubits":[0]}]}'
        )
        with pytest.raises(ParseError, match="warp"):
            read_circuit(str(path))

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version":9,"num_qubits":2,"gates":[]}')
        with pytest.raises(VersionMismatch):
            read_circuit(str(path))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version":1,')
        with pytest.raises(ParseError, match="line"):
            read_circuit(str(path))

    def test_malformed_gate_fields(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version":1,"num_qubits":2,"gates":[{"name":"h"}]}')
        with pytest.raises(ParseError):
            read_circuit(str(path))
        path.write_text('{"version":1,"num_qubits":2,"gates":[{"name":"cx","qubits":[0,5]}]}')
        with pytest.raises(ParseError):
            read_circuit(str(path))

    def test_top_level_not_object(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1,2,3]")
        with pytest.raises(ParseError):
            read_circuit(str(path))

    def test_layers_recomputed_not_trusted(self, tmp_path):
        # stored layer info is absent from the format; gates on shared
        # qubits are re-layered on read
        path = tmp_path / "c.json"
        path.write_text(
            '{"version":1,"num_qubits":2,"gates":['
            '{"name":"h","qubits":[0]},{"name":"h","qubits":[0]}]}'
        )
        c = read_circuit(str(path))
        assert [g.layer for g in c.gates] == [1, 2]


def test_gate_validation():
    with pytest.raises(BadArity):
        Circuit(3, [Gate("cx", (0, 0))])
    with pytest.raises(BadArity):
        Circuit(3, [Gate("cx", (0,))])
