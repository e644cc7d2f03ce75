"""Pure-numpy implementations of the hot kernels.

These functions define the reference semantics; the compiled core in
``_core.pyx`` must match them.  All inputs and outputs are C-contiguous
``complex128`` arrays.

Truncation rule (shared by both backends): singular values are sorted
descending; values below ``1e-12`` times the largest are numerical zeros
(LAPACK only resolves the spectrum to about machine epsilon times the
norm) and are always dropped without counting as truncation; values with
``s < eta * s[0]`` are discarded; at most ``chi_max`` values are kept (a
prefix of the sorted spectrum, so ties at the cut keep earlier positions).
The local fidelity ``sum(kept s^2) / sum(all s^2)`` is recorded before any
renormalization.  If ``renormalize`` is set, the kept values are rescaled
so the truncated tensor keeps the 2-norm of the input.

Phase convention: the first entry of each right-singular vector whose
magnitude exceeds ``1e-12`` times the row maximum is made real and
non-negative; QR factors have a real non-negative R diagonal.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptySpectrum, NonFinite

_PHASE_TOL = 1e-12
NOISE_FLOOR = 1e-12


def _fix_svd_phases(u: np.ndarray, vh: np.ndarray) -> None:
    """Rotate each singular pair so vh rows lead with a real non-negative entry."""
    mags = np.abs(vh)
    tops = mags.max(axis=1)
    safe = np.where(tops > 0.0, tops, 1.0)
    lead = np.argmax(mags > (_PHASE_TOL * safe)[:, None], axis=1)
    rows = np.arange(vh.shape[0])
    entries = vh[rows, lead]
    entry_mags = mags[rows, lead]
    nonzero = entry_mags > 0.0
    phases = np.where(nonzero, entries / np.where(nonzero, entry_mags, 1.0), 1.0)
    vh *= np.conj(phases)[:, None]
    u *= phases[None, :]


def _effective_rank(s: np.ndarray) -> int:
    """Entries above the numerical noise floor (relative to the largest)."""
    return int(np.searchsorted(-s, -NOISE_FLOOR * s[0], side="left"))


def select_rank(s: np.ndarray, chi_max: int, eta: float) -> int:
    """Number of singular values kept under the shared truncation rule."""
    if s.size == 0 or not np.isfinite(s[0]):
        raise NonFinite("singular spectrum is not finite")
    if s[0] <= 0.0:
        raise EmptySpectrum("all singular values are zero")
    keep = int(np.searchsorted(-s, -eta * s[0], side="right"))
    keep = min(max(keep, 1), chi_max, _effective_rank(s))
    return keep


def truncated_svd_matrix(
    mat: np.ndarray, chi_max: int, eta: float, renormalize: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, bool]:
    """Truncated SVD of a matrix.

    Returns ``(u, s, vh, fidelity, truncated)`` where ``fidelity`` is the
    kept-to-total ratio of squared singular values and ``truncated`` marks
    whether weight above the noise floor was discarded.
    """
    mat = np.ascontiguousarray(mat, dtype=np.complex128)
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust.
        import scipy.linalg

        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    if not np.isfinite(s).all():
        raise NonFinite("SVD produced non-finite singular values")
    keep = select_rank(s, chi_max, eta)
    weights = s * s
    total = float(weights.sum())
    kept = float(weights[:keep].sum())
    fidelity = min(kept / total, 1.0)
    truncated = keep < _effective_rank(s)
    u = np.ascontiguousarray(u[:, :keep])
    vh = np.ascontiguousarray(vh[:keep])
    s = s[:keep].copy()
    _fix_svd_phases(u, vh)
    if renormalize and fidelity < 1.0:
        s *= np.sqrt(total / kept)
    return u, s, vh, fidelity, truncated


def apply_two_site(
    a1: np.ndarray,
    a2: np.ndarray,
    gate: np.ndarray,
    chi_max: int,
    eta: float,
    renormalize: bool,
) -> tuple[np.ndarray, np.ndarray, float, bool]:
    """Apply a two-qubit gate to neighboring sites and re-split.

    ``a1`` has axes (left, phys, mid), ``a2`` (mid, phys, right) and ``gate``
    (out0, out1, in0, in1).  Returns the left-isometric new ``a1``, the new
    ``a2`` with singular values absorbed, the local fidelity and the
    truncation flag.  The orthogonality center must sit on one of the two
    sites; it ends on the right one.
    """
    left, _, mid = a1.shape
    right = a2.shape[2]
    theta = a1.reshape(left * 2, mid) @ a2.reshape(mid, 2 * right)
    theta = theta.reshape(left, 4, right)
    theta = np.matmul(gate.reshape(4, 4), theta)  # batched over the left axis
    u, s, vh, fidelity, truncated = truncated_svd_matrix(
        theta.reshape(left * 2, 2 * right), chi_max, eta, renormalize
    )
    keep = s.size
    new_a1 = u.reshape(left, 2, keep)
    new_a2 = (s[:, None] * vh).reshape(keep, 2, right)
    return new_a1, new_a2, fidelity, truncated


def qr_reduced(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR with the R diagonal made real and non-negative."""
    mat = np.ascontiguousarray(mat, dtype=np.complex128)
    q, r = np.linalg.qr(mat, mode="reduced")
    diag = np.diagonal(r).copy()
    mags = np.abs(diag)
    phases = np.where(mags > 0.0, diag / np.where(mags > 0.0, mags, 1.0), 1.0)
    q = q * phases[None, :]
    r = np.conj(phases)[:, None] * r
    return np.ascontiguousarray(q), np.ascontiguousarray(r)


def rq_reduced(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``mat = l @ q`` with orthonormal rows in ``q``.

    Used when moving the orthogonality center leftward.
    """
    qt, rt = qr_reduced(np.ascontiguousarray(mat.conj().T))
    return np.ascontiguousarray(rt.conj().T), np.ascontiguousarray(qt.conj().T)
