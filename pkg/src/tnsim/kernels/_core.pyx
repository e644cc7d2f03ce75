# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: two-site gate application, truncated SVD, QR shifts.

Same semantics as ``tnsim.kernels.pure`` (truncation rule, noise floor,
phase conventions); BLAS/LAPACK are called directly through scipy's Cython
bindings to avoid per-call numpy overhead on the small matrices that
dominate MPS circuit simulation.  Row-major arrays are passed to LAPACK in
transposed interpretation, so no layout copies are needed for the SVD.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm
from scipy.linalg.cython_lapack cimport zgeqrf, zgesdd, zungqr

from ..errors import EmptySpectrum, NonFinite
from . import pure as _pure

cnp.import_array()

DEF PHASE_TOL = 1e-12
DEF NOISE_FLOOR = 1e-12

ctypedef double complex zdouble


cdef int _select_keep(double[::1] s, int chi_max, double eta) except -1:
    """Shared truncation rule; returns the kept rank, raising on bad spectra."""
    cdef int full = s.shape[0]
    cdef int keep = 0
    cdef int eff = 0
    cdef int i
    if full == 0 or s[0] != s[0]:
        raise NonFinite("singular spectrum is not finite")
    if s[0] <= 0.0:
        raise EmptySpectrum("all singular values are zero")
    cdef double eta_cut = eta * s[0]
    cdef double noise_cut = NOISE_FLOOR * s[0]
    for i in range(full):
        if s[i] >= eta_cut:
            keep += 1
        if s[i] > noise_cut:
            eff += 1
    if keep < 1:
        keep = 1
    if keep > chi_max:
        keep = chi_max
    if keep > eff:
        keep = eff
    return keep


cdef void _fix_phases(zdouble[:, ::1] u, zdouble[:, ::1] vh) noexcept:
    """Make each vh row lead with a real non-negative entry."""
    cdef Py_ssize_t rows = vh.shape[0]
    cdef Py_ssize_t cols = vh.shape[1]
    cdef Py_ssize_t urows = u.shape[0]
    cdef Py_ssize_t i, j, lead
    cdef double top, mag
    cdef zdouble phase, conj_phase
    for i in range(rows):
        top = 0.0
        for j in range(cols):
            mag = abs(vh[i, j])
            if mag > top:
                top = mag
        if top == 0.0:
            continue
        lead = 0
        for j in range(cols):
            if abs(vh[i, j]) > PHASE_TOL * top:
                lead = j
                break
        mag = abs(vh[i, lead])
        if mag == 0.0:
            continue
        phase = vh[i, lead] / mag
        conj_phase = phase.conjugate()
        for j in range(cols):
            vh[i, j] = vh[i, j] * conj_phase
        for j in range(urows):
            u[j, i] = u[j, i] * phase


cdef tuple _svd_rowmajor(cnp.ndarray[zdouble, ndim=2] mat):
    """Thin SVD of a C-contiguous matrix; returns (u, s, vh) or None on failure."""
    cdef int m = mat.shape[0]
    cdef int n = mat.shape[1]
    cdef int k = m if m < n else n
    # LAPACK sees the row-major buffer as the (n x m) transpose.
    cdef int ml = n, nl = m
    cdef cnp.ndarray[zdouble, ndim=2] a = mat.copy()
    cdef cnp.ndarray[double, ndim=1] s = np.empty(k, dtype=np.float64)
    # col-major (ml x k) buffer == row-major (k, n): becomes our vh
    cdef cnp.ndarray[zdouble, ndim=2] ubuf = np.empty((k, n), dtype=np.complex128)
    # col-major (k x nl) buffer == row-major (m, k): becomes our u
    cdef cnp.ndarray[zdouble, ndim=2] vtbuf = np.empty((m, k), dtype=np.complex128)
    cdef int lda = ml, ldu = ml, ldvt = k
    cdef int info = 0, lwork = -1
    cdef zdouble work_query
    cdef long mn = <long> k
    cdef long mx = <long> (m if m > n else n)
    cdef long lrwork_l = mn * max(5 * mn + 7, 2 * mx + 2 * mn + 1)
    cdef cnp.ndarray[double, ndim=1] rwork = np.empty(lrwork_l, dtype=np.float64)
    cdef cnp.ndarray[int, ndim=1] iwork = np.empty(8 * k, dtype=np.intc)
    zgesdd(b"S", &ml, &nl, <zdouble*> a.data, &lda, <double*> s.data,
           <zdouble*> ubuf.data, &ldu, <zdouble*> vtbuf.data, &ldvt,
           &work_query, &lwork, <double*> rwork.data, <int*> iwork.data, &info)
    if info != 0:
        return None
    lwork = <int> work_query.real
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(lwork, dtype=np.complex128)
    zgesdd(b"S", &ml, &nl, <zdouble*> a.data, &lda, <double*> s.data,
           <zdouble*> ubuf.data, &ldu, <zdouble*> vtbuf.data, &ldvt,
           <zdouble*> work.data, &lwork, <double*> rwork.data,
           <int*> iwork.data, &info)
    if info != 0:
        return None
    return vtbuf, s, ubuf  # (our u, s, our vh)


def truncated_svd_matrix(mat, int chi_max, double eta, bint renormalize):
    """Compiled counterpart of ``pure.truncated_svd_matrix``."""
    cdef cnp.ndarray[zdouble, ndim=2] m2 = np.ascontiguousarray(mat, dtype=np.complex128)
    res = _svd_rowmajor(m2)
    if res is None:
        return _pure.truncated_svd_matrix(m2, chi_max, eta, renormalize)
    cdef cnp.ndarray[zdouble, ndim=2] u_full = res[0]
    cdef cnp.ndarray[double, ndim=1] s_full = res[1]
    cdef cnp.ndarray[zdouble, ndim=2] vh_full = res[2]
    cdef Py_ssize_t i
    for i in range(s_full.shape[0]):
        if s_full[i] != s_full[i]:
            raise NonFinite("SVD produced non-finite singular values")
    cdef int keep = _select_keep(s_full, chi_max, eta)
    cdef double total = 0.0, kept = 0.0, w
    cdef int eff = 0
    cdef double noise_cut = NOISE_FLOOR * s_full[0]
    for i in range(s_full.shape[0]):
        w = s_full[i] * s_full[i]
        total += w
        if i < keep:
            kept += w
        if s_full[i] > noise_cut:
            eff += 1
    cdef double fidelity = kept / total
    if fidelity > 1.0:
        fidelity = 1.0
    cdef bint truncated = keep < eff
    cdef cnp.ndarray[zdouble, ndim=2] u = np.ascontiguousarray(u_full[:, :keep])
    cdef cnp.ndarray[zdouble, ndim=2] vh = np.ascontiguousarray(vh_full[:keep])
    cdef cnp.ndarray[double, ndim=1] s = s_full[:keep].copy()
    _fix_phases(u, vh)
    cdef double scale
    if renormalize and fidelity < 1.0:
        scale = sqrt(total / kept)
        for i in range(keep):
            s[i] *= scale
    return u, s, vh, fidelity, truncated


def apply_two_site(a1, a2, gate, int chi_max, double eta, bint renormalize):
    """Compiled counterpart of ``pure.apply_two_site``."""
    cdef cnp.ndarray[zdouble, ndim=3] t1 = np.ascontiguousarray(a1, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=3] t2 = np.ascontiguousarray(a2, dtype=np.complex128)
    # gate matrices may arrive as read-only cache entries
    cdef const zdouble[:, ::1] gv = np.ascontiguousarray(gate, dtype=np.complex128).reshape(4, 4)
    cdef int left = t1.shape[0]
    cdef int mid = t1.shape[2]
    cdef int right = t2.shape[2]
    cdef int rows = 2 * left
    cdef int cols = 2 * right
    cdef cnp.ndarray[zdouble, ndim=2] theta = np.empty((rows, cols), dtype=np.complex128)
    cdef zdouble one = 1.0, zero = 0.0
    # row-major product theta = T1(rows x mid) @ T2(mid x cols) via the
    # col-major identity C^T = B^T A^T
    zgemm(b"N", b"N", &cols, &rows, &mid, &one,
          <zdouble*> t2.data, &cols, <zdouble*> t1.data, &mid,
          &zero, <zdouble*> theta.data, &cols)
    # gate on the middle (4-dim) index: out[x, p, r] = sum_q G[p, q] theta[x, q, r]
    cdef cnp.ndarray[zdouble, ndim=2] out = np.empty((rows, cols), dtype=np.complex128)
    cdef zdouble* tp = <zdouble*> theta.data
    cdef zdouble* op = <zdouble*> out.data
    cdef Py_ssize_t x, p, q, r
    cdef zdouble acc
    cdef Py_ssize_t stride = right  # elements per (x, q) row chunk
    for x in range(left):
        for p in range(4):
            for r in range(right):
                acc = 0.0
                for q in range(4):
                    acc = acc + gv[p, q] * tp[(x * 4 + q) * stride + r]
                op[(x * 4 + p) * stride + r] = acc
    u, s, vh, fidelity, truncated = truncated_svd_matrix(out, chi_max, eta, renormalize)
    cdef int keep = s.shape[0]
    new_a1 = u.reshape(left, 2, keep)
    new_a2 = (np.asarray(s)[:, None] * np.asarray(vh)).reshape(keep, 2, right)
    return new_a1, new_a2, fidelity, truncated


cdef tuple _lq_natural(cnp.ndarray[zdouble, ndim=2] mat):
    """Natural factorization of a row-major matrix: mat = L @ Q.

    zgeqrf on the raw buffer (seen as the transpose) yields the unique RQ
    form with orthonormal rows in Q; phase-fixed so diag(L) is real >= 0.
    Returns None on LAPACK failure.
    """
    cdef int m = mat.shape[0]
    cdef int n = mat.shape[1]
    cdef int k = m if m < n else n
    cdef int ml = n, nl = m, lda = n
    cdef cnp.ndarray[zdouble, ndim=2] a = mat.copy()
    cdef cnp.ndarray[zdouble, ndim=1] tau = np.empty(k, dtype=np.complex128)
    cdef int info = 0, lwork = -1
    cdef zdouble work_query
    zgeqrf(&ml, &nl, <zdouble*> a.data, &lda, <zdouble*> tau.data,
           &work_query, &lwork, &info)
    if info != 0:
        return None
    lwork = <int> work_query.real
    cdef cnp.ndarray[zdouble, ndim=1] work = np.empty(lwork, dtype=np.complex128)
    zgeqrf(&ml, &nl, <zdouble*> a.data, &lda, <zdouble*> tau.data,
           <zdouble*> work.data, &lwork, &info)
    if info != 0:
        return None
    # upper triangle of the col-major (n x m) A holds R~(k x m);
    # L = R~^T is the row-major (m, k) lower factor
    cdef cnp.ndarray[zdouble, ndim=2] lmat = np.zeros((m, k), dtype=np.complex128)
    cdef zdouble* ap = <zdouble*> a.data
    cdef Py_ssize_t i, j
    for j in range(m):
        for i in range(k):
            if i <= j:
                lmat[j, i] = ap[j * n + i]
    # orthonormal factor: zungqr expands to the first k reflectors
    cdef int kk = k
    lwork = -1
    zungqr(&ml, &kk, &kk, <zdouble*> a.data, &lda, <zdouble*> tau.data,
           &work_query, &lwork, &info)
    if info != 0:
        return None
    lwork = <int> work_query.real
    work = np.empty(lwork, dtype=np.complex128)
    zungqr(&ml, &kk, &kk, <zdouble*> a.data, &lda, <zdouble*> tau.data,
           <zdouble*> work.data, &lwork, &info)
    if info != 0:
        return None
    # col-major (n x k) Q~ == row-major (k, n) Q with orthonormal rows
    cdef cnp.ndarray[zdouble, ndim=2] qmat = np.empty((k, n), dtype=np.complex128)
    memcpy(<void*> qmat.data, <void*> a.data, k * n * sizeof(zdouble))
    # phase fix: diag(L) real >= 0
    cdef double mag
    cdef zdouble phase, conj_phase
    for i in range(k):
        mag = abs(lmat[i, i])
        if mag == 0.0:
            continue
        phase = lmat[i, i] / mag
        conj_phase = phase.conjugate()
        for j in range(m):
            lmat[j, i] = lmat[j, i] * conj_phase
        for j in range(n):
            qmat[i, j] = qmat[i, j] * phase
    return lmat, qmat


def rq_reduced(mat):
    """Compiled counterpart of ``pure.rq_reduced``: mat = L @ Q."""
    cdef cnp.ndarray[zdouble, ndim=2] m2 = np.ascontiguousarray(mat, dtype=np.complex128)
    res = _lq_natural(m2)
    if res is None:
        return _pure.rq_reduced(m2)
    return res


def qr_reduced(mat):
    """Compiled counterpart of ``pure.qr_reduced``: mat = Q @ R."""
    cdef cnp.ndarray[zdouble, ndim=2] m2 = np.ascontiguousarray(mat, dtype=np.complex128)
    cdef cnp.ndarray[zdouble, ndim=2] mh = np.ascontiguousarray(m2.conj().T)
    res = _lq_natural(mh)
    if res is None:
        return _pure.qr_reduced(m2)
    lmat, qmat = res
    q = np.ascontiguousarray(np.asarray(qmat).conj().T)
    r = np.ascontiguousarray(np.asarray(lmat).conj().T)
    return q, r
