"""Open-boundary matrix product states with orthogonality-center bookkeeping.

Site tensors have axes (left bond, physical, right bond) with physical
dimension 2; sites are indexed from 0 and bond ``b`` sits between sites
``b`` and ``b + 1``.  Qubit 0 is the most significant bit of the dense
statevector, so ``from_product_state([0, 1, 0, 1])`` places amplitude 1 at
index ``0b0101``.

When ``ortho_center == i`` every site left of ``i`` is a left isometry and
every site right of ``i`` a right isometry, so the squared norm of the
state is the squared Frobenius norm of site ``i``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    BadShape,
    EmptyInput,
    IndexOutOfRange,
    LengthMismatch,
    NonUnitary,
    ParseError,
    VersionMismatch,
)
from .tensor import TruncationPolicy

_SNAPSHOT_MAGIC = b"TNSIMPS\x00"
_SNAPSHOT_VERSION = 1


@dataclass
class FidelityLedger:
    """Running product of local truncation fidelities.

    ``log_fidelity`` accumulates ``sum(log f_i)`` so the estimate stays
    well-conditioned over many truncations; ``factors`` keeps the raw
    history so the product can be recomputed from logs.
    """

    log_fidelity: float = 0.0
    truncation_count: int = 0
    factors: list[float] = field(default_factory=list)

    def record(self, fidelity: float, truncated: bool) -> None:
        self.factors.append(fidelity)
        self.log_fidelity += math.log(fidelity)
        if truncated:
            self.truncation_count += 1

    @property
    def fidelity_estimate(self) -> float:
        return math.exp(self.log_fidelity)


class Mps:
    """Matrix product state over qubits with open boundaries."""

    def __init__(self, sites: list[np.ndarray], ortho_center: int | None = None):
        if not sites:
            raise EmptyInput("an MPS needs at least one site")
        self.sites = [np.ascontiguousarray(s, dtype=np.complex128) for s in sites]
        self.ortho_center = ortho_center
        self._validate_shapes()

    def _validate_shapes(self) -> None:
        if self.sites[0].shape[0] != 1 or self.sites[-1].shape[2] != 1:
            raise BadShape("boundary bonds must have dimension 1")
        for i, site in enumerate(self.sites):
            if site.ndim != 3 or site.shape[1] != 2:
                raise BadShape(f"site {i} must have shape (left, 2, right)")
            if i + 1 < len(self.sites) and site.shape[2] != self.sites[i + 1].shape[0]:
                raise BadShape(f"bond {i} dimensions disagree between sites")

    # -- construction -------------------------------------------------

    @classmethod
    def from_product_state(cls, bits: Sequence[int]) -> "Mps":
        """Computational basis state |bits>, all bond dimensions 1."""
        if len(bits) == 0:
            raise EmptyInput("empty bit list")
        sites = []
        for bit in bits:
            if bit not in (0, 1):
                raise ValueError(f"bits must be 0 or 1, got {bit}")
            site = np.zeros((1, 2, 1), dtype=np.complex128)
            site[0, bit, 0] = 1.0
            sites.append(site)
        return cls(sites, ortho_center=0)

    def copy(self) -> "Mps":
        other = Mps.__new__(Mps)
        other.sites = [s.copy() for s in self.sites]
        other.ortho_center = self.ortho_center
        return other

    # -- basic queries ------------------------------------------------

    @property
    def num_sites(self) -> int:
        return len(self.sites)

    @property
    def bond_dims(self) -> list[int]:
        """Interior bond dimensions, one per bond 0..N-2."""
        return [site.shape[2] for site in self.sites[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def norm(self) -> float:
        if self.ortho_center is not None:
            center = self.sites[self.ortho_center]
            return float(np.sqrt(np.sum(np.abs(center) ** 2)))
        return float(np.sqrt(abs(overlap(self, self))))

    # -- canonical form -----------------------------------------------

    def _shift_right(self, i: int) -> None:
        site = self.sites[i]
        left, _, right = site.shape
        q, r = kernels.qr_reduced(site.reshape(left * 2, right))
        k = q.shape[1]
        self.sites[i] = q.reshape(left, 2, k)
        self.sites[i + 1] = np.tensordot(r, self.sites[i + 1], axes=(1, 0))

    def _shift_left(self, i: int) -> None:
        site = self.sites[i]
        left, _, right = site.shape
        l_mat, q = kernels.rq_reduced(site.reshape(left, 2 * right))
        k = q.shape[0]
        self.sites[i] = q.reshape(k, 2, right)
        self.sites[i - 1] = np.tensordot(self.sites[i - 1], l_mat, axes=(2, 0))

    def orthogonalize(self, center: int) -> "Mps":
        """Bring the state into mixed-canonical form with the given center.

        The global state is unchanged; repeated calls with the same center
        are no-ops.  Returns self for chaining.
        """
        n = self.num_sites
        if not 0 <= center < n:
            raise IndexOutOfRange(f"center {center} outside 0..{n - 1}")
        if self.ortho_center is None:
            for i in range(center):
                self._shift_right(i)
            for i in range(n - 1, center, -1):
                self._shift_left(i)
        else:
            while self.ortho_center < center:
                self._shift_right(self.ortho_center)
                self.ortho_center += 1
            while self.ortho_center > center:
                self._shift_left(self.ortho_center)
                self.ortho_center -= 1
        self.ortho_center = center
        return self

    def normalize(self) -> "Mps":
        """Scale the state to unit norm (orthogonalizes if needed)."""
        if self.ortho_center is None:
            self.orthogonalize(0)
        nrm = self.norm()
        if nrm == 0.0:
            raise BadShape("cannot normalize a zero state")
        self.sites[self.ortho_center] = self.sites[self.ortho_center] / nrm
        return self

    # -- gate application ----------------------------------------------

    def apply_adjacent_gate(
        self,
        gate: np.ndarray,
        start: int,
        policy: TruncationPolicy,
        ledger: FidelityLedger | None = None,
        validate_unitarity: bool = False,
    ) -> "Mps":
        """Apply an n-qubit gate on sites ``start .. start + n - 1``.

        ``gate`` is a ``2^n x 2^n`` matrix (or the equivalent rank-2n
        tensor) acting on adjacent sites in ascending order.  Multi-qubit
        gates orthogonalize to ``start``, contract, and re-split through
        ``n - 1`` truncated SVDs sweeping rightward, leaving the center on
        the rightmost touched site.  Single-qubit gates touch nothing else.
        """
        mat = np.ascontiguousarray(gate, dtype=np.complex128)
        dim = int(round(mat.size ** 0.5))
        n = dim.bit_length() - 1
        if 2**n != dim or mat.size != dim * dim:
            raise BadShape(f"gate of size {mat.size} is not a 2^n x 2^n matrix")
        mat = mat.reshape(dim, dim)
        if not 0 <= start <= self.num_sites - n:
            raise IndexOutOfRange(
                f"gate on sites {start}..{start + n - 1} outside 0..{self.num_sites - 1}"
            )
        if validate_unitarity:
            err = np.abs(mat.conj().T @ mat - np.eye(dim)).max()
            if err > 1e-10:
                raise NonUnitary(f"gate deviates from unitarity by {err:.2e}")

        if n == 1:
            site = self.sites[start]
            self.sites[start] = np.tensordot(mat, site, axes=(1, 1)).transpose(1, 0, 2)
            return self

        self.orthogonalize(start)
        if n == 2:
            a1, a2, fid, truncated = kernels.apply_two_site(
                self.sites[start],
                self.sites[start + 1],
                mat.reshape(2, 2, 2, 2),
                policy.chi_max,
                policy.cutoff_eta,
                policy.renormalize,
            )
            self.sites[start] = a1
            self.sites[start + 1] = a2
            if ledger is not None:
                ledger.record(fid, truncated)
            self.ortho_center = start + 1
            return self

        # Generic n >= 3 path: contract the block, then re-split.
        theta = self.sites[start]
        for off in range(1, n):
            theta = np.tensordot(theta, self.sites[start + off], axes=(theta.ndim - 1, 0))
        # theta axes: (left, p_0 .. p_{n-1}, right)
        gate_t = mat.reshape((2,) * (2 * n))
        theta = np.tensordot(gate_t, theta, axes=(list(range(n, 2 * n)), list(range(1, n + 1))))
        # now axes: (p'_0 .. p'_{n-1}, left, right)
        theta = np.moveaxis(theta, n, 0)  # (left, p'_0 .. p'_{n-1}, right)
        right_dim = theta.shape[-1]
        cur = theta
        for off in range(n - 1):
            left_dim = cur.shape[0]
            rest = cur.size // (left_dim * 2)
            u, s, vh, fid, truncated = kernels.truncated_svd_matrix(
                cur.reshape(left_dim * 2, rest),
                policy.chi_max,
                policy.cutoff_eta,
                policy.renormalize,
            )
            k = s.size
            self.sites[start + off] = u.reshape(left_dim, 2, k)
            if ledger is not None:
                ledger.record(fid, truncated)
            cur = (s[:, None] * vh).reshape((k,) + (2,) * (n - 1 - off) + (right_dim,))
        self.sites[start + n - 1] = cur.reshape(cur.shape[0], 2, right_dim)
        self.ortho_center = start + n - 1
        return self

    # -- diagnostics ----------------------------------------------------

    def entanglement_entropy(self, bond: int) -> float:
        """Von Neumann entropy in bits across ``bond`` (0-based)."""
        if not 0 <= bond < self.num_sites - 1:
            raise IndexOutOfRange(f"bond {bond} outside 0..{self.num_sites - 2}")
        self.orthogonalize(bond)
        site = self.sites[bond]
        left, _, right = site.shape
        s = np.linalg.svd(site.reshape(left * 2, right), compute_uv=False)
        weights = s * s
        total = weights.sum()
        if total == 0.0:
            raise BadShape("zero-norm state has no Schmidt spectrum")
        weights = weights / total
        weights = weights[weights > 1e-300]
        return float(-np.sum(weights * np.log2(weights)))

    def to_statevector(self) -> np.ndarray:
        """Dense amplitudes, qubit 0 as the most significant bit."""
        cur = self.sites[0][0]  # (2, r)
        for site in self.sites[1:]:
            cur = np.tensordot(cur, site, axes=(cur.ndim - 1, 0))
        return np.ascontiguousarray(cur[..., 0].reshape(-1))

    def sample_bits(self, num_bits: int, rng: np.random.Generator) -> list[int]:
        """Sample the first ``num_bits`` qubits by conditional sweeps.

        Exact chain-rule sampling: orthogonalizes to site 0 (gauge change
        only), then draws one bit per site conditioned on the prefix.
        """
        if not 0 < num_bits <= self.num_sites:
            raise IndexOutOfRange(f"cannot sample {num_bits} of {self.num_sites} sites")
        self.orthogonalize(0)
        bits: list[int] = []
        prefix = np.ones(1, dtype=np.complex128)
        for i in range(num_bits):
            site = self.sites[i]
            amp0 = prefix @ site[:, 0, :]
            amp1 = prefix @ site[:, 1, :]
            p0 = float(np.sum(np.abs(amp0) ** 2))
            p1 = float(np.sum(np.abs(amp1) ** 2))
            total = p0 + p1
            bit = 1 if rng.random() * total >= p0 else 0
            chosen = amp1 if bit else amp0
            prob = p1 if bit else p0
            prefix = chosen / np.sqrt(prob)
            bits.append(bit)
        return bits


def overlap(a: Mps, b: Mps) -> complex:
    """Inner product <a|b> by zip contraction."""
    if a.num_sites != b.num_sites:
        raise LengthMismatch(f"{a.num_sites} vs {b.num_sites} sites")
    env = np.ones((1, 1), dtype=np.complex128)
    for sa, sb in zip(a.sites, b.sites):
        env = np.tensordot(env, sb, axes=(1, 0))  # (la*, p, rb)
        env = np.tensordot(sa.conj(), env, axes=([0, 1], [0, 1]))  # (ra*, rb)
    return complex(env[0, 0])


def decompose_dense(
    psi: np.ndarray,
    policy: TruncationPolicy,
    ledger: FidelityLedger | None = None,
) -> list[np.ndarray]:
    """Split a dense segment tensor into a chain of rank-3 site tensors.

    ``psi`` must have shape (chi_left, 2, ..., 2, chi_right).  A first sweep
    of exact SVDs exposes the Schmidt spectrum of ``psi`` at every cut; each
    bond is then truncated against its own exact spectrum (so the recorded
    fidelity factor at every cut is the kept-to-total weight of the input
    state there), and a final QR pass leaves the chain left-canonical with
    the norm carried by the last tensor.
    """
    from .kernels.pure import _effective_rank, select_rank

    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if psi.ndim < 3 or any(d != 2 for d in psi.shape[1:-1]):
        raise BadShape(f"expected (chi_l, 2, ..., 2, chi_r), got {psi.shape}")
    m = psi.ndim - 2
    if m == 1:
        return [psi.copy()]
    right_dim = psi.shape[-1]
    input_norm = float(np.linalg.norm(psi))

    # Exact sweep: left-canonical tensors plus the exact spectrum per cut.
    tensors: list[np.ndarray] = []
    spectra: list[np.ndarray] = []
    cur = psi
    for step in range(m - 1):
        left_dim = cur.shape[0]
        rest = cur.size // (left_dim * 2)
        u, s, vh, _, _ = kernels.truncated_svd_matrix(
            cur.reshape(left_dim * 2, rest), left_dim * 2, 0.0, False
        )
        tensors.append(u.reshape(left_dim, 2, s.size))
        spectra.append(s)
        cur = (s[:, None] * vh).reshape((s.size,) + (2,) * (m - 1 - step) + (right_dim,))
    tensors.append(cur.reshape(cur.shape[0], 2, right_dim))

    # Truncate every bond against the exact spectrum of the input state.
    for b, s in enumerate(spectra):
        keep = select_rank(s, policy.chi_max, policy.cutoff_eta)
        weights = s * s
        total = float(weights.sum())
        fid = min(float(weights[:keep].sum()) / total, 1.0)
        truncated = keep < _effective_rank(s)
        if ledger is not None:
            ledger.record(fid, truncated)
        if keep < tensors[b].shape[2]:
            tensors[b] = np.ascontiguousarray(tensors[b][:, :, :keep])
            tensors[b + 1] = np.ascontiguousarray(tensors[b + 1][:keep])

    # QR pass restores left-canonical form; the last tensor carries the norm.
    for b in range(m - 1):
        left_dim, _, rdim = tensors[b].shape
        q, r = kernels.qr_reduced(tensors[b].reshape(left_dim * 2, rdim))
        tensors[b] = q.reshape(left_dim, 2, q.shape[1])
        tensors[b + 1] = np.tensordot(r, tensors[b + 1], axes=(1, 0))
    if policy.renormalize:
        out_norm = float(np.linalg.norm(tensors[-1]))
        if out_norm > 0.0:
            tensors[-1] = tensors[-1] * (input_norm / out_norm)
    return tensors


def write_snapshot(mps: Mps, path: str) -> None:
    """Binary MPS snapshot: header (magic, version, N, center, bonds) + data.

    All integers and complex values are little-endian; site data is stored
    in C order with shapes implied by the bond list.
    """
    with open(path, "wb") as fh:
        fh.write(_SNAPSHOT_MAGIC)
        center = -1 if mps.ortho_center is None else mps.ortho_center
        fh.write(struct.pack("<IIi", _SNAPSHOT_VERSION, mps.num_sites, center))
        for dim in mps.bond_dims:
            fh.write(struct.pack("<I", dim))
        for site in mps.sites:
            fh.write(np.ascontiguousarray(site).astype("<c16").tobytes())


def read_snapshot(path: str) -> Mps:
    """Read a snapshot written by :func:`write_snapshot`."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _SNAPSHOT_MAGIC:
            raise ParseError(f"bad magic {magic!r}")
        version, n, center = struct.unpack("<IIi", fh.read(12))
        if version != _SNAPSHOT_VERSION:
            raise VersionMismatch(f"snapshot version {version} unsupported")
        bonds = [struct.unpack("<I", fh.read(4))[0] for _ in range(n - 1)]
        dims = [1] + bonds + [1]
        sites = []
        for i in range(n):
            count = dims[i] * 2 * dims[i + 1]
            raw = fh.read(count * 16)
            if len(raw) != count * 16:
                raise ParseError("truncated snapshot payload")
            site = np.frombuffer(raw, dtype="<c16").astype(np.complex128)
            sites.append(site.reshape(dims[i], 2, dims[i + 1]))
    return Mps(sites, ortho_center=None if center < 0 else center)
