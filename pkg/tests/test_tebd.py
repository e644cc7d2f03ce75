"""Tests for the standard TEBD engine."""

import numpy as np
import pytest

from tnsim.circuit import Circuit, Gate, generate_random_structured
from tnsim.mps import Mps, overlap
from tnsim.oracle import exact_fidelity, simulate_dense
from tnsim.tebd import TebdConfig, run_tebd
from tnsim.tensor import TruncationPolicy


def zeros(n: int) -> Mps:
    return Mps.from_product_state([0] * n)


def test_identity_circuit_returns_input(figure_circuit):
    gates = [Gate("id", (q,)) for g in figure_circuit.gates for q in g.qubits]
    circuit = Circuit(8, gates)
    initial = zeros(8)
    final, ledger, stats = run_tebd(circuit, initial, TebdConfig(TruncationPolicy(16)))
    assert abs(overlap(initial, final)) == pytest.approx(1.0, abs=1e-12)
    assert ledger.fidelity_estimate == pytest.approx(1.0)
    assert stats.max_chi == 1


def test_exact_regime_matches_oracle():
    circuit = generate_random_structured(10, 20, "nonclifford", seed=1)
    final, ledger, stats = run_tebd(
        circuit, zeros(10), TebdConfig(TruncationPolicy(chi_max=32))
    )
    sv = simulate_dense(circuit, [0] * 10)
    assert exact_fidelity(final, sv) >= 1 - 1e-9
    assert ledger.fidelity_estimate >= 1 - 1e-12
    assert stats.max_chi <= 32


def test_truncating_regime_estimator_tracks_exact():
    # chi_max=3 forces clear truncation on this seed (exact F ~ 0.68); the
    # estimator is approximate, so per-seed agreement is looser than the
    # mean-error bound checked over 20 seeds in the acceptance suite
    circuit = generate_random_structured(10, 20, "nonclifford", seed=2)
    final, ledger, _ = run_tebd(
        circuit, zeros(10), TebdConfig(TruncationPolicy(chi_max=3))
    )
    sv = simulate_dense(circuit, [0] * 10)
    exact = exact_fidelity(final, sv)
    assert ledger.fidelity_estimate < 0.9
    assert abs(ledger.fidelity_estimate - exact) < 0.1


def test_single_qubit_gates_free():
    gates = [Gate("h", (q,)) for q in range(6)] + [Gate("t", (q,)) for q in range(6)]
    circuit = Circuit(6, gates)
    final, ledger, stats = run_tebd(circuit, zeros(6), TebdConfig(TruncationPolicy(8)))
    assert final.bond_dims == [1] * 5
    assert ledger.factors == []
    assert stats.truncation_count == 0


def test_ledger_product_recomputable():
    circuit = generate_random_structured(8, 12, "clifford", seed=3)
    _, ledger, _ = run_tebd(circuit, zeros(8), TebdConfig(TruncationPolicy(chi_max=2)))
    product = float(np.prod(ledger.factors))
    assert product == pytest.approx(ledger.fidelity_estimate, rel=1e-9)


def test_chi_respects_policy():
    circuit = generate_random_structured(10, 15, "nonclifford", seed=5)
    final, _, stats = run_tebd(circuit, zeros(10), TebdConfig(TruncationPolicy(chi_max=3)))
    assert stats.max_chi <= 3
    assert max(final.bond_dims) <= 3


def test_unlimited_chi_norm_and_overlap():
    # chi_max >= 2^(N/2) with eta=0 keeps the evolution exact
    circuit = generate_random_structured(8, 16, "nonclifford", seed=6)
    final, ledger, _ = run_tebd(circuit, zeros(8), TebdConfig(TruncationPolicy(chi_max=16)))
    assert final.norm() == pytest.approx(1.0, abs=1e-10)
    assert all(f == pytest.approx(1.0, abs=1e-12) for f in ledger.factors)
    sv = simulate_dense(circuit, [0] * 8)
    assert exact_fidelity(final, sv) >= 1 - 1e-9


def test_non_adjacent_gate_rejected():
    from tnsim.errors import NonAdjacentGate

    circuit = Circuit(4, [Gate("cx", (0, 2))])
    with pytest.raises(NonAdjacentGate):
        run_tebd(circuit, zeros(4), TebdConfig(TruncationPolicy(8)))


def test_progress_hook_called():
    circuit = generate_random_structured(5, 5, "clifford", seed=7)
    seen = []
    cfg = TebdConfig(TruncationPolicy(8), progress_hook=seen.append)
    run_tebd(circuit, zeros(5), cfg)
    assert seen[-1] == pytest.approx(1.0)
    assert len(seen) == circuit.num_layers


def test_estimator_mean_absolute_error_small_sample():
    # small-sample mean-error check in a strongly truncating regime
    errors = []
    for seed in range(6):
        circuit = generate_random_structured(10, 20, "nonclifford", seed=seed)
        final, ledger, _ = run_tebd(
            circuit, zeros(10), TebdConfig(TruncationPolicy(chi_max=3))
        )
        sv = simulate_dense(circuit, [0] * 10)
        errors.append(abs(ledger.fidelity_estimate - exact_fidelity(final, sv)))
    assert float(np.mean(errors)) <= 0.05
