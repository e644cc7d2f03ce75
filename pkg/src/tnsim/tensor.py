"""Dense complex tensor algebra: contraction, QR, and truncated SVD.

Tensors are plain numpy ``complex128`` arrays in C (row-major) order; the
shape tuple plus that fixed linearization fully determine the stored data.
Results are reproducible bit-for-bit across runs on one platform thanks to
fixed phase conventions: QR factors carry a real non-negative R diagonal,
and each right-singular vector leads with a real non-negative entry.

All functions are pure; disjoint tensors may be contracted concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import AxisOutOfRange, DimensionMismatch, NonFinite


@dataclass(frozen=True)
class TruncationPolicy:
    """Singular-value truncation parameters.

    ``chi_max`` caps the number of kept values; ``cutoff_eta`` discards
    values smaller than ``cutoff_eta`` times the largest one (a relative
    threshold, so it survives state renormalization); ``renormalize``
    rescales the kept spectrum to preserve the input 2-norm.
    """

    chi_max: int
    cutoff_eta: float = 0.0
    renormalize: bool = True

    def __post_init__(self) -> None:
        if self.chi_max < 1:
            raise ValueError(f"chi_max must be >= 1, got {self.chi_max}")
        if not 0.0 <= self.cutoff_eta < 1.0:
            raise ValueError(f"cutoff_eta must be in [0, 1), got {self.cutoff_eta}")


@dataclass
class SvdResult:
    """Outcome of a truncated SVD.

    ``u`` carries the left axes plus the new bond, ``v`` the new bond plus
    the right axes; ``s`` is the kept spectrum, descending and strictly
    positive.  ``local_fidelity`` is the kept-to-total ratio of squared
    singular values, recorded before any renormalization.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    local_fidelity: float
    kept_rank: int
    truncated: bool


def asarray(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Coerce input to a C-contiguous complex128 array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=np.complex128)
    if shape is not None:
        arr = arr.reshape(tuple(shape))
    return arr


def _check_axes(ndim: int, axes: Sequence[int], label: str) -> None:
    seen = set()
    for ax in axes:
        if not 0 <= ax < ndim:
            raise AxisOutOfRange(f"axis {ax} out of range for rank-{ndim} {label}")
        if ax in seen:
            raise AxisOutOfRange(f"axis {ax} repeated for {label}")
        seen.add(ax)


def contract(
    a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]
) -> np.ndarray:
    """Contract two tensors over the given (axis-of-a, axis-of-b) pairs.

    The result carries the free axes of ``a`` in order, then the free axes
    of ``b``.  An empty pair list yields the outer product.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    _check_axes(a.ndim, axes_a, "first operand")
    _check_axes(b.ndim, axes_b, "second operand")
    for ax_a, ax_b in pairs:
        if a.shape[ax_a] != b.shape[ax_b]:
            raise DimensionMismatch(
                f"axis {ax_a} (dim {a.shape[ax_a]}) does not match "
                f"axis {ax_b} (dim {b.shape[ax_b]})"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def _split_axes(t: np.ndarray, left_axes: Sequence[int]) -> tuple[list[int], list[int]]:
    _check_axes(t.ndim, left_axes, "tensor")
    left = list(left_axes)
    right = [ax for ax in range(t.ndim) if ax not in set(left)]
    return left, right


def svd_truncated(
    t: np.ndarray, left_axes: Sequence[int], policy: TruncationPolicy
) -> SvdResult:
    """Truncated SVD of ``t`` split between ``left_axes`` and the rest.

    The tensor is reshaped to a matrix over (left axes | remaining axes),
    decomposed, and truncated per ``policy``.  Raises ``EmptySpectrum`` if
    every singular value would be discarded and ``NonFinite`` on NaN input.
    """
    t = asarray(t)
    if not np.isfinite(t).all():
        raise NonFinite("input tensor contains NaN or Inf")
    left, right = _split_axes(t, left_axes)
    ldims = [t.shape[ax] for ax in left]
    rdims = [t.shape[ax] for ax in right]
    mat = t.transpose(left + right).reshape(int(np.prod(ldims)), int(np.prod(rdims)))
    u, s, vh, fidelity, truncated = kernels.truncated_svd_matrix(
        mat, policy.chi_max, policy.cutoff_eta, policy.renormalize
    )
    keep = s.size
    return SvdResult(
        u=u.reshape(*ldims, keep),
        s=s,
        v=vh.reshape(keep, *rdims),
        local_fidelity=fidelity,
        kept_rank=keep,
        truncated=truncated,
    )


def qr(t: np.ndarray, left_axes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR of ``t`` split between ``left_axes`` and the rest.

    ``q`` has orthonormal columns on the new bond and ``contract(q, r)``
    over that bond reproduces ``t``.
    """
    t = asarray(t)
    if not np.isfinite(t).all():
        raise NonFinite("input tensor contains NaN or Inf")
    left, right = _split_axes(t, left_axes)
    ldims = [t.shape[ax] for ax in left]
    rdims = [t.shape[ax] for ax in right]
    mat = t.transpose(left + right).reshape(int(np.prod(ldims)), int(np.prod(rdims)))
    q, r = kernels.qr_reduced(mat)
    k = q.shape[1]
    return q.reshape(*ldims, k), r.reshape(k, *rdims)
