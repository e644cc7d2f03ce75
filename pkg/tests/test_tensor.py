"""Tests for dense tensor contraction, truncated SVD, and QR."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tnsim.errors import (
    AxisOutOfRange,
    DimensionMismatch,
    EmptySpectrum,
    NonFinite,
)
from tnsim.tensor import SvdResult, TruncationPolicy, contract, qr, svd_truncated

SQ2 = 1.0 / np.sqrt(2.0)
H = np.array([[SQ2, SQ2], [SQ2, -SQ2]], dtype=complex)


def random_tensor(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestContract:
    def test_identity_on_vector(self):
        out = contract(np.eye(2, dtype=complex), np.array([1.0, 0.0]), [(1, 0)])
        np.testing.assert_allclose(out, [1.0, 0.0])

    def test_hadamard_on_zero(self):
        out = contract(H, np.array([1.0, 0.0]), [(1, 0)])
        np.testing.assert_allclose(out, [SQ2, SQ2], atol=1e-15)

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(7)
        a = random_tensor(rng, (2, 3, 4))
        b = random_tensor(rng, (4, 3))
        out = contract(a, b, [(2, 0), (1, 1)])
        expected = np.zeros(2, dtype=complex)
        for i in range(2):
            acc = 0.0 + 0.0j
            for j in range(3):
                for k in range(4):
                    acc += a[i, j, k] * b[k, j]
            expected[i] = acc
        np.testing.assert_allclose(out, expected, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            contract(np.zeros((2, 3)), np.zeros((3, 2)), [(0, 0)])
        with pytest.raises(DimensionMismatch):
            contract(np.zeros((2, 5)), np.zeros((4, 2)), [(1, 0)])

    def test_axis_errors(self):
        with pytest.raises(AxisOutOfRange):
            contract(np.zeros((2, 2)), np.zeros((2, 2)), [(2, 0)])
        with pytest.raises(AxisOutOfRange):
            contract(np.zeros((2, 2)), np.zeros((2, 2)), [(0, 0), (0, 1)])

    def test_bilinear_in_scalar(self):
        rng = np.random.default_rng(3)
        a = random_tensor(rng, (3, 4))
        b = random_tensor(rng, (4, 5))
        lhs = contract(2.5j * a, b, [(1, 0)])
        rhs = 2.5j * contract(a, b, [(1, 0)])
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 4), st.integers(2, 4), st.integers(2, 4), st.integers(0, 10**6))
    def test_matches_tensordot_shapes(self, d1, d2, d3, seed):
        rng = np.random.default_rng(seed)
        a = random_tensor(rng, (d1, d2))
        b = random_tensor(rng, (d2, d3))
        out = contract(a, b, [(1, 0)])
        assert out.shape == (d1, d3)
        np.testing.assert_allclose(out, a @ b, rtol=1e-12)


class TestSvdTruncated:
    def test_bell_matrix_full(self):
        t = np.eye(2, dtype=complex) * SQ2
        res = svd_truncated(t, [0], TruncationPolicy(chi_max=2))
        np.testing.assert_allclose(res.s, [SQ2, SQ2], rtol=1e-14)
        assert res.local_fidelity == pytest.approx(1.0)
        assert res.kept_rank == 2

    def test_bell_matrix_truncated(self):
        t = np.eye(2, dtype=complex) * SQ2
        res = svd_truncated(t, [0], TruncationPolicy(chi_max=1, renormalize=False))
        np.testing.assert_allclose(res.s, [SQ2], rtol=1e-14)
        assert res.local_fidelity == pytest.approx(0.5)
        assert res.kept_rank == 1
        # with renormalization the kept spectrum regains the input norm
        res2 = svd_truncated(t, [0], TruncationPolicy(chi_max=1, renormalize=True))
        np.testing.assert_allclose(res2.s, [1.0], rtol=1e-14)
        assert res2.local_fidelity == pytest.approx(0.5)

    def test_unitary_gate_untouched(self):
        cnot = np.eye(4, dtype=complex)[:, [0, 1, 3, 2]]
        res = svd_truncated(cnot.reshape(2, 2, 2, 2), [0, 1], TruncationPolicy(chi_max=4))
        assert res.local_fidelity == pytest.approx(1.0)
        assert res.kept_rank <= 4
        assert res.u.shape[:2] == (2, 2) and res.v.shape[1:] == (2, 2)

    def test_reconstruction_when_exact(self):
        rng = np.random.default_rng(11)
        t = random_tensor(rng, (3, 4, 5))
        res = svd_truncated(t, [0, 2], TruncationPolicy(chi_max=64))
        # result axes come out as (left axes 0,2 | right axis 1)
        full = np.einsum("abk,k,kc->abc", res.u, res.s, res.v).transpose(0, 2, 1)
        err = np.linalg.norm(full - t) / np.linalg.norm(t)
        assert err < 1e-10
        assert res.local_fidelity == pytest.approx(1.0)

    def test_fidelity_monotone_in_chi(self):
        rng = np.random.default_rng(5)
        t = random_tensor(rng, (8, 8))
        fids = [
            svd_truncated(t, [0], TruncationPolicy(chi_max=k)).local_fidelity
            for k in range(1, 9)
        ]
        assert all(f1 <= f2 + 1e-15 for f1, f2 in zip(fids, fids[1:]))

    def test_spectrum_descending_and_positive(self):
        rng = np.random.default_rng(9)
        t = random_tensor(rng, (6, 7))
        res = svd_truncated(t, [0], TruncationPolicy(chi_max=6))
        assert np.all(res.s[:-1] >= res.s[1:])
        assert np.all(res.s > 0)

    def test_empty_spectrum(self):
        with pytest.raises(EmptySpectrum):
            svd_truncated(np.zeros((3, 3), dtype=complex), [0], TruncationPolicy(chi_max=2))

    def test_non_finite(self):
        bad = np.full((2, 2), np.nan, dtype=complex)
        with pytest.raises(NonFinite):
            svd_truncated(bad, [0], TruncationPolicy(chi_max=2))

    def test_cutoff_eta_relative(self):
        t = np.diag([1.0, 0.5, 1e-8]).astype(complex)
        res = svd_truncated(t, [0], TruncationPolicy(chi_max=3, cutoff_eta=1e-6))
        assert res.kept_rank == 2
        assert res.truncated

    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 10**6))
    def test_exact_svd_reconstructs(self, m, n, seed):
        rng = np.random.default_rng(seed)
        t = random_tensor(rng, (m, n))
        res = svd_truncated(t, [0], TruncationPolicy(chi_max=max(m, n)))
        rebuilt = (res.u * res.s[None, :]) @ res.v
        assert np.linalg.norm(rebuilt - t) / np.linalg.norm(t) < 1e-10


class TestQr:
    def test_identity(self):
        q, r = qr(np.eye(3, dtype=complex), [0])
        np.testing.assert_allclose(q, np.eye(3), atol=1e-14)
        np.testing.assert_allclose(r, np.eye(3), atol=1e-14)

    def test_hadamard_isometry(self):
        q, r = qr(H, [0])
        np.testing.assert_allclose(q.conj().T @ q, np.eye(2), atol=1e-14)
        assert np.all(np.diagonal(r).real >= 0)
        assert np.abs(np.diagonal(r).imag).max() < 1e-14

    def test_random_reconstruction(self):
        rng = np.random.default_rng(2)
        t = random_tensor(rng, (8, 3))
        q, r = qr(t, [0])
        err = np.linalg.norm(q @ r - t) / np.linalg.norm(t)
        assert err < 1e-12

    def test_phase_convention_deterministic(self):
        rng = np.random.default_rng(4)
        t = random_tensor(rng, (5, 5))
        q1, r1 = qr(t, [0])
        q2, r2 = qr(t.copy(), [0])
        np.testing.assert_array_equal(q1, q2)
        np.testing.assert_array_equal(r1, r2)


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(chi_max=0)
    with pytest.raises(ValueError):
        TruncationPolicy(chi_max=2, cutoff_eta=1.0)
    with pytest.raises(ValueError):
        TruncationPolicy(chi_max=2, cutoff_eta=-0.1)


def test_svd_result_fields():
    t = np.eye(2, dtype=complex)
    res = svd_truncated(t, [0], TruncationPolicy(chi_max=2))
    assert isinstance(res, SvdResult)
    assert res.kept_rank == len(res.s) <= 2
