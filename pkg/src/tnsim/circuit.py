"""Circuit data model: gate library, layer assignment, random generation, file IO.

A gate layer groups operations on pairwise-disjoint qubits that can act in
one time step; layers are 1-based and assigned greedily, so each gate lands
on the earliest layer consistent with program order.  Qubits are 0-based.

The circuit file is UTF-8 JSON with fields ``version``, ``num_qubits`` and
``gates`` (program order); layer indices are never serialized and are
recomputed on read.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import (
    BadArity,
    IndexOutOfRange,
    NonAdjacentGate,
    ParseError,
    UnknownGate,
    VersionMismatch,
)

FILE_VERSION = 1

_SQ2 = 1.0 / math.sqrt(2.0)


def _mat(rows) -> np.ndarray:
    return np.array(rows, dtype=np.complex128)


def _controlled(u: np.ndarray) -> np.ndarray:
    out = np.eye(4, dtype=np.complex128)
    out[2:, 2:] = u
    return out


def _h() -> np.ndarray:
    return _mat([[_SQ2, _SQ2], [_SQ2, -_SQ2]])


def _x() -> np.ndarray:
    return _mat([[0, 1], [1, 0]])


def _y() -> np.ndarray:
    return _mat([[0, -1j], [1j, 0]])


def _z() -> np.ndarray:
    return _mat([[1, 0], [0, -1]])


def _phase(phi: float) -> np.ndarray:
    return _mat([[1, 0], [0, cmath.exp(1j * phi)]])


def _x_fourth_root() -> np.ndarray:
    # X**(1/4): global phase chosen so the fourth power reproduces X exactly.
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    return cmath.exp(1j * math.pi / 8) * _mat([[c, -1j * s], [-1j * s, c]])


def _w_sqrt() -> np.ndarray:
    # Principal square root of W = (X + Y)/sqrt(2); squares to W exactly.
    e = cmath.exp(1j * math.pi / 4)
    return _SQ2 * _mat([[e, -1j], [1, e]])


def _swap() -> np.ndarray:
    return _mat([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])


def _swap_sqrt() -> np.ndarray:
    a, b = 0.5 * (1 + 1j), 0.5 * (1 - 1j)
    return _mat([[1, 0, 0, 0], [0, a, b, 0], [0, b, a, 0], [0, 0, 0, 1]])


def _toffoli() -> np.ndarray:
    out = np.eye(8, dtype=np.complex128)
    out[6, 6] = out[7, 7] = 0
    out[6, 7] = out[7, 6] = 1
    return out


def _fredkin() -> np.ndarray:
    out = np.eye(8, dtype=np.complex128)
    out[5, 5] = out[6, 6] = 0
    out[5, 6] = out[6, 5] = 1
    return out


def _cc_phase(phi: float) -> np.ndarray:
    out = np.eye(8, dtype=np.complex128)
    out[7, 7] = cmath.exp(1j * phi)
    return out


# name -> (num_qubits, num_params, builder)
GATE_DEFS = {
    "id": (1, 0, lambda: np.eye(2, dtype=np.complex128)),
    "h": (1, 0, _h),
    "x": (1, 0, _x),
    "y": (1, 0, _y),
    "z": (1, 0, _z),
    "t": (1, 0, lambda: _phase(math.pi / 4)),
    "p": (1, 1, _phase),
    "x4": (1, 0, _x_fourth_root),
    "sqw": (1, 0, _w_sqrt),
    "cx": (2, 0, lambda: _controlled(_x())),
    "cy": (2, 0, lambda: _controlled(_y())),
    "cz": (2, 0, lambda: _controlled(_z())),
    "swap": (2, 0, _swap),
    "ch": (2, 0, lambda: _controlled(_h())),
    "cs": (2, 0, lambda: _controlled(_phase(math.pi / 2))),
    "ct": (2, 0, lambda: _controlled(_phase(math.pi / 4))),
    "sswap": (2, 0, _swap_sqrt),
    "cp": (2, 1, lambda phi: _controlled(_phase(phi))),
    "ccx": (3, 0, _toffoli),
    "cswap": (3, 0, _fredkin),
    "ccp": (3, 1, _cc_phase),
}

CLIFFORD_SINGLE = ("h", "x", "y", "z")
CLIFFORD_TWO = ("cx", "cy", "cz", "swap")
NONCLIFFORD_SINGLE = CLIFFORD_SINGLE + ("t", "p", "x4", "sqw")
NONCLIFFORD_TWO = CLIFFORD_TWO + ("ch", "cs", "ct", "sswap")
_P_RANDOM_PHASE = 3 * math.pi / 4  # fixed angle used by the random family


@dataclass(frozen=True, slots=True)
class Gate:
    """One gate: library name, ordered qubits, radian parameters, layer."""

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    layer: int | None = None

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)


@lru_cache(maxsize=None)
def gate_matrix(name: str, params: tuple[float, ...] = ()) -> np.ndarray:
    """Unitary matrix for a library gate; cached, do not mutate the result."""
    if name not in GATE_DEFS:
        raise UnknownGate(f"unknown gate '{name}'")
    nq, nparams, builder = GATE_DEFS[name]
    if len(params) != nparams:
        raise BadArity(f"gate '{name}' takes {nparams} parameter(s), got {len(params)}")
    mat = builder(*params)
    mat.setflags(write=False)
    return mat


def _validate_gate(gate: Gate, num_qubits: int) -> None:
    if gate.name not in GATE_DEFS:
        raise UnknownGate(f"unknown gate '{gate.name}'")
    nq, nparams, _ = GATE_DEFS[gate.name]
    if len(gate.qubits) != nq:
        raise BadArity(f"gate '{gate.name}' acts on {nq} qubit(s), got {gate.qubits}")
    if len(gate.params) != nparams:
        raise BadArity(f"gate '{gate.name}' takes {nparams} parameter(s)")
    if len(set(gate.qubits)) != len(gate.qubits):
        raise BadArity(f"repeated qubit in {gate.qubits}")
    for q in gate.qubits:
        if not 0 <= q < num_qubits:
            raise IndexOutOfRange(f"qubit {q} outside 0..{num_qubits - 1}")


class Circuit:
    """Immutable ordered gate list with computed layer indices."""

    def __init__(self, num_qubits: int, gates: Iterable[Gate]):
        if num_qubits < 1:
            raise IndexOutOfRange("circuit needs at least one qubit")
        self.num_qubits = num_qubits
        staged = []
        last = [0] * num_qubits
        for gate in gates:
            _validate_gate(gate, num_qubits)
            layer = 1 + max(last[q] for q in gate.qubits)
            staged.append(replace(gate, layer=layer))
            for q in gate.qubits:
                last[q] = layer
        self.gates: tuple[Gate, ...] = tuple(staged)
        self.num_layers = max(last)
        self._by_layer: list[list[Gate]] | None = None

    def gates_by_layer(self) -> list[list[Gate]]:
        """Gates grouped per layer (index 0 = layer 1), position-sorted."""
        if self._by_layer is None:
            buckets: list[list[Gate]] = [[] for _ in range(self.num_layers)]
            for gate in self.gates:
                buckets[gate.layer - 1].append(gate)
            for bucket in buckets:
                bucket.sort(key=lambda g: min(g.qubits))
            self._by_layer = buckets
        return self._by_layer

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Circuit)
            and self.num_qubits == other.num_qubits
            and self.gates == other.gates
        )

    def __repr__(self) -> str:
        return (
            f"Circuit(num_qubits={self.num_qubits}, gates={len(self.gates)}, "
            f"layers={self.num_layers})"
        )


def assign_layers(num_qubits: int, gates: Iterable[Gate]) -> Circuit:
    """Build a circuit, assigning each gate its earliest feasible layer."""
    return Circuit(num_qubits, gates)


@lru_cache(maxsize=None)
def _ordered_matrix(name: str, params: tuple[float, ...], perm: tuple[int, ...]) -> np.ndarray:
    n = len(perm)
    mat = gate_matrix(name, params)
    if perm == tuple(range(n)):
        return mat
    tensor = mat.reshape((2,) * (2 * n))
    axes = list(perm) + [p + n for p in perm]
    out = np.ascontiguousarray(tensor.transpose(axes).reshape(2**n, 2**n))
    out.setflags(write=False)
    return out


def adjacent_form(gate: Gate) -> tuple[int, np.ndarray]:
    """Start site and matrix rearranged for ascending adjacent qubits.

    Raises ``NonAdjacentGate`` when the gate's qubits are not a contiguous
    run, which the MPS engines require.
    """
    qubits = gate.qubits
    if len(qubits) == 1:
        return qubits[0], gate_matrix(gate.name, gate.params)
    ordered = sorted(qubits)
    if ordered[-1] - ordered[0] != len(qubits) - 1:
        raise NonAdjacentGate(f"gate '{gate.name}' on non-neighboring qubits {qubits}")
    perm = tuple(qubits.index(q) for q in ordered)
    return ordered[0], _ordered_matrix(gate.name, gate.params, perm)


def generate_random_structured(
    num_qubits: int, num_layers: int, family: str, seed: int
) -> Circuit:
    """Random-structured circuit: fill ``num_layers`` layers with gates.

    Each attempt draws a single-qubit gate (probability 0.5, uniform over
    the family's single-qubit set, uniform qubit) or a two-qubit gate
    (uniform over the two-qubit set, uniform adjacent pair, random
    orientation).  Attempts whose assigned layer would exceed
    ``num_layers`` are discarded; generation stops once every qubit is
    blocked at the last layer.  Deterministic per seed (PCG64 stream,
    draws in the fixed order: kind, gate, position[, orientation]).
    """
    if num_qubits < 2:
        raise IndexOutOfRange("need at least two qubits")
    if num_layers < 1:
        raise IndexOutOfRange("need at least one layer")
    if family == "clifford":
        singles, twos = CLIFFORD_SINGLE, CLIFFORD_TWO
    elif family == "nonclifford":
        singles, twos = NONCLIFFORD_SINGLE, NONCLIFFORD_TWO
    else:
        raise ValueError(f"family must be 'clifford' or 'nonclifford', got {family!r}")

    rng = np.random.default_rng(seed)
    last = np.zeros(num_qubits, dtype=np.int64)
    open_qubits = num_qubits  # qubits whose last layer < num_layers
    gates: list[Gate] = []
    while open_qubits > 0:
        two_qubit = rng.random() >= 0.5
        if two_qubit:
            name = twos[int(rng.integers(len(twos)))]
            pos = int(rng.integers(num_qubits - 1))
            flip = int(rng.integers(2))
            qubits = (pos + 1, pos) if flip else (pos, pos + 1)
            layer = 1 + int(max(last[pos], last[pos + 1]))
            if layer > num_layers:
                continue
            for q in qubits:
                if layer == num_layers:
                    open_qubits -= 1
                last[q] = layer
            params = (_P_RANDOM_PHASE,) if name == "p" else ()
            gates.append(Gate(name, qubits, params))
        else:
            name = singles[int(rng.integers(len(singles)))]
            q = int(rng.integers(num_qubits))
            layer = 1 + int(last[q])
            if layer > num_layers:
                continue
            if layer == num_layers:
                open_qubits -= 1
            last[q] = layer
            params = (_P_RANDOM_PHASE,) if name == "p" else ()
            gates.append(Gate(name, (q,), params))
    return Circuit(num_qubits, gates)


def write_circuit(circuit: Circuit, path: str) -> None:
    """Serialize in program order; byte-deterministic for equal circuits."""
    payload = {
        "version": FILE_VERSION,
        "num_qubits": circuit.num_qubits,
        "gates": [
            {"name": g.name, "qubits": list(g.qubits), "params": list(g.params)}
            for g in circuit.gates
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def read_circuit(path: str) -> Circuit:
    """Parse a circuit file; stored layer data, if any, is ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ParseError("top-level value must be an object")
    version = payload.get("version")
    if version != FILE_VERSION:
        raise VersionMismatch(f"file version {version!r}, expected {FILE_VERSION}")
    try:
        num_qubits = int(payload["num_qubits"])
        raw_gates = payload["gates"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc}") from exc
    gates = []
    for idx, item in enumerate(raw_gates):
        name = item.get("name")
        if name not in GATE_DEFS:
            raise ParseError(f"gate {idx}: unknown gate '{name}'")
        try:
            qubits = tuple(int(q) for q in item["qubits"])
            params = tuple(float(p) for p in item.get("params", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"gate {idx}: malformed fields ({exc})") from exc
        gates.append(Gate(name, qubits, params))
    try:
        return Circuit(num_qubits, gates)
    except (BadArity, IndexOutOfRange) as exc:
        raise ParseError(str(exc)) from exc
