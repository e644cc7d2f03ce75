"""Order-finding circuits for factoring, plus classical pre/postprocessing.

The quantum core performs phase estimation of the modular multiplication
U|x> = |a*x mod N>, built from controlled modular adders working in the
Fourier basis (single-qubit rotations for classical addends), following the
controlled-multiplier layout of the standard construction.  Long-range
interactions are made nearest-neighbor by SWAP chains that move qubits
together and immediately back, so the qubit order is restored after every
routed gate.

Register layout on the chain, top to bottom (n = bit length of N,
t = 2n + ceil(log2(2 + 1/(2*eps))) counting qubits):

    [counting t] [mirror 1] [x n] [and 1] [b n+1] [compare 1]

for a total of 4n + 4 + ceil(log2(2 + 1/(2*eps))) qubits.  The mirror
ancilla holds a temporary copy of the active counting bit so only two
long-range CNOTs are routed per controlled multiplier; the and ancilla
carries the (counting AND x_i) product so the adder rotations are singly
controlled.  Counting position j controls U^(2^(t-1-j)), which makes the
final inverse Fourier transform (without terminal swaps) leave the phase
little-endian on the counting register.

Controlled rotations with angle magnitude below eps*pi are dropped
(approximate Fourier-transform pruning).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .cluster import ClusterConfig, run_cluster_tebd
from .dmrg import DmrgConfig, run_dmrg
from .errors import InvalidParams, OracleTooLarge
from .mps import Mps
from .oracle import qubit_cap, simulate_dense
from .tebd import TebdConfig, run_tebd
from .tensor import TruncationPolicy

TWO_PI = 2.0 * math.pi


def counting_qubits(n: int, epsilon: float) -> int:
    return 2 * n + math.ceil(math.log2(2.0 + 1.0 / (2.0 * epsilon)))


def total_qubits(n_to_factor: int, epsilon: float) -> int:
    n = n_to_factor.bit_length()
    return 4 * n + 4 + math.ceil(math.log2(2.0 + 1.0 / (2.0 * epsilon)))


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


def _prime_power_root(n: int) -> int | None:
    for k in range(2, n.bit_length() + 1):
        root = round(n ** (1.0 / k))
        for cand in (root - 1, root, root + 1):
            if cand >= 2 and cand**k == n:
                return cand
    return None


@dataclass
class ShorParams:
    n_to_factor: int
    base: int | None = None
    epsilon: float = 1e-3
    seed: int = 0

    def validate(self) -> None:
        n = self.n_to_factor
        if n < 4 or n % 2 == 0:
            raise InvalidParams(f"{n} must be an odd composite")
        if _is_prime(n):
            raise InvalidParams(f"{n} is prime")
        if _prime_power_root(n) is not None:
            raise InvalidParams(f"{n} is a prime power")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParams(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.base is not None:
            if not 1 < self.base < n:
                raise InvalidParams(f"base {self.base} outside (1, {n})")
            if math.gcd(self.base, n) != 1:
                raise InvalidParams(f"gcd({self.base}, {n}) != 1")

    def pick_base(self, rng: np.random.Generator) -> int:
        if self.base is not None:
            return self.base
        candidates = [
            a for a in range(2, self.n_to_factor) if math.gcd(a, self.n_to_factor) == 1
        ]
        return int(candidates[int(rng.integers(len(candidates)))])


@dataclass
class ShorCircuitReport:
    qubit_count: int
    gate_count: int
    layer_count: int
    register_map: dict


@dataclass
class ShorOutcome:
    factors: tuple[int, int] | None
    order: int | None
    status: str  # "factors", "retry"


# -- gate emission ---------------------------------------------------------


class _Builder:
    def __init__(self, num_qubits: int):
        self.num_qubits = num_qubits
        self.gates: list[Gate] = []

    def add(self, name: str, qubits: tuple[int, ...], params: tuple[float, ...] = ()):
        if len(qubits) > 1:
            span = max(qubits) - min(qubits)
            assert span == len(qubits) - 1, f"non-adjacent emission {qubits}"
        self.gates.append(Gate(name, qubits, params))

    def extend(self, gates: Sequence[Gate]) -> None:
        for g in gates:
            self.add(g.name, g.qubits, g.params)

    def _swap_chain(self, src: int, dst: int) -> list[tuple[int, int]]:
        """Move the qubit at ``src`` next to ``dst`` (lands on dst's side)."""
        swaps = []
        if src < dst:
            for s in range(src, dst - 1):
                swaps.append((s, s + 1))
        else:
            for s in range(src, dst + 1, -1):
                swaps.append((s, s - 1))
        return swaps

    def routed2(self, name: str, a: int, b: int, params: tuple[float, ...] = ()):
        """Two-qubit gate on arbitrary positions via SWAP-in / SWAP-out."""
        if abs(a - b) == 1:
            self.add(name, (a, b), params)
            return
        chain = self._swap_chain(a, b)
        for s in chain:
            self.add("swap", (min(s), max(s)))
        moved = b - 1 if a < b else b + 1
        self.add(name, (moved, b), params)
        for s in reversed(chain):
            self.add("swap", (min(s), max(s)))

    def routed3(self, name: str, q1: int, q2: int, q3: int):
        """Three-qubit gate: outer operands are walked next to the middle."""
        lo, mid, hi = sorted((q1, q2, q3))
        chain_lo = self._swap_chain(lo, mid) if mid - lo > 1 else []
        chain_hi = self._swap_chain(hi, mid) if hi - mid > 1 else []
        for s in chain_lo:
            self.add("swap", (min(s), max(s)))
        for s in chain_hi:
            self.add("swap", (min(s), max(s)))
        pos = {lo: mid - 1, mid: mid, hi: mid + 1}
        self.add(name, (pos[q1], pos[q2], pos[q3]))
        for s in reversed(chain_hi):
            self.add("swap", (min(s), max(s)))
        for s in reversed(chain_lo):
            self.add("swap", (min(s), max(s)))


def _inverse_gate(gate: Gate) -> Gate:
    self_inverse = {
        "id", "h", "x", "y", "z", "cx", "cy", "cz", "swap", "ccx", "cswap"
    }
    if gate.name in self_inverse:
        return Gate(gate.name, gate.qubits)
    if gate.name in ("p", "cp", "ccp"):
        return Gate(gate.name, gate.qubits, (-gate.params[0],))
    raise ValueError(f"no inverse rule for gate '{gate.name}'")


def inverse_gates(gates: Sequence[Gate]) -> list[Gate]:
    return [_inverse_gate(g) for g in reversed(gates)]


def _norm_angle(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta > math.pi:
        theta -= TWO_PI
    elif theta <= -math.pi:
        theta += TWO_PI
    return theta


def _phase_for_add(value: int, j: int) -> float:
    """Rotation on Fourier-basis qubit j when adding ``value``."""
    frac = value % (1 << (j + 1))
    return _norm_angle(TWO_PI * frac / (1 << (j + 1)))


def _qft_gates(b: _Builder, positions: Sequence[int], prune_eps: float) -> None:
    """Fourier transform of a little-endian register (no terminal swaps)."""
    nb = len(positions)
    for j in range(nb - 1, -1, -1):
        b.add("h", (positions[j],))
        for k in range(j - 1, -1, -1):
            angle = TWO_PI / (1 << (j - k + 1))
            if abs(angle) < prune_eps * math.pi:
                continue
            b.routed2("cp", positions[k], positions[j], (angle,))


def _qft_inverse_gates(b: _Builder, positions: Sequence[int], prune_eps: float) -> None:
    tmp = _Builder(b.num_qubits)
    _qft_gates(tmp, positions, prune_eps)
    b.extend(inverse_gates(tmp.gates))


def _phi_add_const(
    b: _Builder, value: int, b_pos: Sequence[int], sign: int
) -> None:
    """Uncontrolled Fourier-basis addition of a classical constant."""
    for j, pos in enumerate(b_pos):
        angle = _phase_for_add(value, j) * sign
        if angle != 0.0:
            b.add("p", (pos,), (angle,))


def _c_phi_add_const(
    b: _Builder,
    value: int,
    ctrl: int,
    b_pos: Sequence[int],
    sign: int,
    prune_eps: float,
) -> None:
    """Controlled Fourier-basis addition, pruning tiny rotations."""
    for j, pos in enumerate(b_pos):
        angle = _phase_for_add(value, j) * sign
        if angle == 0.0 or abs(angle) < prune_eps * math.pi:
            continue
        b.routed2("cp", ctrl, pos, (angle,))


def _phi_add_mod(
    b: _Builder,
    value: int,
    modulus: int,
    ctrl: int,
    b_pos: Sequence[int],
    cmp_pos: int,
    prune_eps: float,
) -> None:
    """Controlled b <- b + value (mod modulus), b in the Fourier basis.

    Requires b < modulus on entry; the compare ancilla starts and ends
    in |0>.  The b register has one more bit than the modulus so the
    intermediate subtraction can be detected by the top bit.
    """
    msb = b_pos[-1]
    _c_phi_add_const(b, value, ctrl, b_pos, +1, prune_eps)
    _phi_add_const(b, modulus, b_pos, -1)
    _qft_inverse_gates(b, b_pos, prune_eps)
    b.add("cx", (msb, cmp_pos))
    _qft_gates(b, b_pos, prune_eps)
    _c_phi_add_const(b, modulus, cmp_pos, b_pos, +1, prune_eps)
    _c_phi_add_const(b, value, ctrl, b_pos, -1, prune_eps)
    _qft_inverse_gates(b, b_pos, prune_eps)
    b.add("x", (msb,))
    b.add("cx", (msb, cmp_pos))
    b.add("x", (msb,))
    _qft_gates(b, b_pos, prune_eps)
    _c_phi_add_const(b, value, ctrl, b_pos, +1, prune_eps)


@dataclass
class _Registers:
    counting: list[int]
    mirror: int
    x: list[int]
    and_anc: int
    b: list[int]
    compare: int

    @property
    def total(self) -> int:
        return self.compare + 1


def _layout(n: int, t: int) -> _Registers:
    return _Registers(
        counting=list(range(t)),
        mirror=t,
        x=list(range(t + 1, t + 1 + n)),
        and_anc=t + 1 + n,
        b=list(range(t + n + 2, t + 2 * n + 3)),
        compare=t + 2 * n + 3,
    )


def _cmult_gates(
    a_val: int,
    modulus: int,
    ctrl: int,
    regs: _Registers,
    prune_eps: float,
) -> list[Gate]:
    """Controlled b += a_val * x (mod modulus) as a gate list."""
    b = _Builder(regs.total)
    _qft_gates(b, regs.b, prune_eps)
    for i, xq in enumerate(regs.x):
        value = (a_val << i) % modulus
        b.routed3("ccx", ctrl, xq, regs.and_anc)
        _phi_add_mod(b, value, modulus, regs.and_anc, regs.b, regs.compare, prune_eps)
        b.routed3("ccx", ctrl, xq, regs.and_anc)
    _qft_inverse_gates(b, regs.b, prune_eps)
    return b.gates


def _controlled_multiplier_gates(
    a_val: int, modulus: int, ctrl: int, regs: _Registers, prune_eps: float
) -> list[Gate]:
    """Controlled |x> -> |a_val * x mod modulus> using the work registers."""
    out = _Builder(regs.total)
    out.extend(_cmult_gates(a_val, modulus, ctrl, regs, prune_eps))
    for i in range(len(regs.x)):
        out.routed3("cswap", ctrl, regs.x[i], regs.b[i])
    a_inv = pow(a_val, -1, modulus)
    out.extend(inverse_gates(_cmult_gates(a_inv, modulus, ctrl, regs, prune_eps)))
    return out.gates


def build_order_finding_circuit(params: ShorParams) -> tuple[Circuit, ShorCircuitReport]:
    """Phase-estimation circuit for the order of ``base`` modulo ``n_to_factor``.

    Counting position j controls the multiplication by base^(2^(t-1-j)),
    and the final inverse Fourier transform leaves the phase little-endian
    on the counting register (no terminal swap network).
    """
    params.validate()
    if params.base is None:
        raise InvalidParams("a base is required to build the circuit")
    n_val = params.n_to_factor
    n = n_val.bit_length()
    t = counting_qubits(n, params.epsilon)
    regs = _layout(n, t)
    b = _Builder(regs.total)
    for q in regs.counting:
        b.add("h", (q,))
    b.add("x", (regs.x[0],))
    for j, cq in enumerate(regs.counting):
        exponent = 1 << (t - 1 - j)
        a_j = pow(params.base, exponent, n_val)
        b.routed2("cx", cq, regs.mirror)
        b.extend(_controlled_multiplier_gates(a_j, n_val, regs.mirror, regs, params.epsilon))
        b.routed2("cx", cq, regs.mirror)
    _qft_inverse_gates(b, regs.counting, params.epsilon)
    circuit = Circuit(regs.total, b.gates)
    report = ShorCircuitReport(
        qubit_count=regs.total,
        gate_count=len(circuit.gates),
        layer_count=circuit.num_layers,
        register_map={
            "counting": [regs.counting[0], regs.counting[-1]],
            "work_x": [regs.x[0], regs.x[-1]],
            "work_b": [regs.b[0], regs.b[-1]],
            "ancilla_mirror": regs.mirror,
            "ancilla_and": regs.and_anc,
            "ancilla_compare": regs.compare,
        },
    )
    return circuit, report


def build_quantum_adder(n_a: int, n_b: int, prune_eps: float = 0.0) -> Circuit:
    """Quantum-quantum Fourier adder: |a>|b> -> |a>|(a + b) mod 2^n_b>.

    Register a sits on qubits 0..n_a-1 (little-endian), register b on the
    next n_b qubits.  Used as a verification block.
    """
    a_pos = list(range(n_a))
    b_pos = list(range(n_a, n_a + n_b))
    b = _Builder(n_a + n_b)
    _qft_gates(b, b_pos, prune_eps)
    for k, aq in enumerate(a_pos):
        for j, bq in enumerate(b_pos):
            angle = _phase_for_add(1 << k, j)
            if angle == 0.0 or abs(angle) < prune_eps * math.pi:
                continue
            b.routed2("cp", aq, bq, (angle,))
    _qft_inverse_gates(b, b_pos, prune_eps)
    return Circuit(n_a + n_b, b.gates)


def build_multiplier_block(a_val: int, modulus: int) -> tuple[Circuit, _Registers]:
    """Standalone controlled-multiplier block with the control set to 1."""
    n = modulus.bit_length()
    regs = _Registers(
        counting=[],
        mirror=0,
        x=list(range(1, n + 1)),
        and_anc=n + 1,
        b=list(range(n + 2, 2 * n + 3)),
        compare=2 * n + 3,
    )
    b = _Builder(regs.total)
    b.add("x", (regs.mirror,))
    b.extend(_controlled_multiplier_gates(a_val, modulus, regs.mirror, regs, 0.0))
    return Circuit(regs.total, b.gates), regs


def modular_multiplier_check(a_val: int, modulus: int, x: int) -> int:
    """Simulate the controlled-multiplier block on |x> and read the x register.

    The block realizes |x> -> |a*x mod N> with clean ancillas for x < N;
    for N <= x < 2^n the x-register readout still equals a*x mod N but the
    work ancillas are not restored (the construction's arithmetic domain
    is x < N).
    """
    n = modulus.bit_length()
    if x >= (1 << n):
        raise InvalidParams(f"x = {x} needs more than {n} bits")
    if 2 * n + 4 > qubit_cap():
        raise OracleTooLarge(
            f"multiplier block needs {2 * n + 4} qubits, cap is {qubit_cap()}"
        )
    circuit, regs = build_multiplier_block(a_val, modulus)
    bits = [0] * regs.total
    for i, xq in enumerate(regs.x):
        bits[xq] = (x >> i) & 1
    sv = simulate_dense(circuit, bits)
    amps = np.abs(sv.amplitudes)
    idx = int(np.argmax(amps))
    if amps[idx] < 0.999:
        raise ArithmeticError("multiplier block did not return a basis state")
    out = 0
    total = regs.total
    for i, xq in enumerate(regs.x):
        bit = (idx >> (total - 1 - xq)) & 1
        out |= bit << i
    return out


# -- classical postprocessing ---------------------------------------------


def _convergents(num: int, den: int):
    p_prev2, p_prev = 0, 1
    q_prev2, q_prev = 1, 0
    while den:
        a0, rem = divmod(num, den)
        num, den = den, rem
        p = a0 * p_prev + p_prev2
        q = a0 * q_prev + q_prev2
        yield p, q
        p_prev2, p_prev = p_prev, p
        q_prev2, q_prev = q_prev, q


def postprocess(measured: int, t: int, params: ShorParams) -> ShorOutcome:
    """Continued-fraction expansion of measured/2^t -> order -> factors.

    Returns a retry outcome when the sample is uninformative, the order is
    odd, or the order leads to the trivial square root of unity.
    """
    n_val = params.n_to_factor
    a_val = params.base
    if a_val is None:
        raise InvalidParams("postprocessing needs the base used in the circuit")
    order = None
    for _, q in _convergents(measured, 1 << t):
        if q <= 0 or q >= n_val:
            continue
        if pow(a_val, q, n_val) == 1:
            order = q
            break
    if order is None:
        return ShorOutcome(factors=None, order=None, status="retry")
    if order % 2 == 1:
        return ShorOutcome(factors=None, order=order, status="retry")
    half = pow(a_val, order // 2, n_val)
    if half == n_val - 1:
        return ShorOutcome(factors=None, order=order, status="retry")
    f1 = math.gcd(half - 1, n_val)
    f2 = math.gcd(half + 1, n_val)
    factors = sorted(f for f in (f1, f2) if 1 < f < n_val)
    if not factors:
        return ShorOutcome(factors=None, order=order, status="retry")
    lo = factors[0]
    return ShorOutcome(factors=(lo, n_val // lo), order=order, status="factors")


# -- end-to-end runs --------------------------------------------------------


@dataclass
class ShorRunResult:
    n_to_factor: int
    base: int
    backend: str
    factors: tuple[int, int] | None
    order: int | None
    attempts: int
    samples: list[int]
    report: ShorCircuitReport
    build_time_s: float
    sim_time_s: float
    sample_time_s: float
    fidelity_estimate: float
    max_chi: int


def run_shor(
    params: ShorParams,
    backend: str = "cluster-tebd",
    chi_max: int = 64,
    cutoff: float = 0.0,
    q_max: int = 14,
    l_max: int | None = 512,
    dmrg_l_max: int = 64,
    max_attempts: int = 10,
) -> ShorRunResult:
    """Build, simulate, sample, and postprocess one factoring attempt.

    The final state is simulated once; sampling repeats (seeded) until the
    postprocessing succeeds or ``max_attempts`` is exhausted.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    base = params.pick_base(rng)
    concrete = ShorParams(params.n_to_factor, base, params.epsilon, params.seed)
    t0 = time.perf_counter()
    circuit, report = build_order_finding_circuit(concrete)
    build_time = time.perf_counter() - t0
    policy = TruncationPolicy(chi_max=chi_max, cutoff_eta=cutoff)
    initial = Mps.from_product_state([0] * circuit.num_qubits)

    t1 = time.perf_counter()
    if backend == "tebd":
        final, ledger, stats = run_tebd(circuit, initial, TebdConfig(policy))
        fidelity, max_chi = ledger.fidelity_estimate, stats.max_chi
    elif backend == "cluster-tebd":
        cfg = ClusterConfig(q_max=q_max, policy=policy, l_max=l_max)
        final, ledger, stats = run_cluster_tebd(circuit, initial, cfg)
        fidelity, max_chi = ledger.fidelity_estimate, stats.max_chi
    elif backend == "dmrg":
        cfg = DmrgConfig(
            l_max=dmrg_l_max,
            chi_max_dmrg=chi_max,
            chi_max_svd=max(4 * chi_max, chi_max),
            q_max=q_max,
            seed=params.seed,
        )
        final, fidelity, dstats = run_dmrg(circuit, cfg)
        max_chi = dstats.max_chi
    elif backend == "statevector":
        if circuit.num_qubits > qubit_cap():
            raise OracleTooLarge(
                f"{circuit.num_qubits} qubits exceeds the dense cap of {qubit_cap()}"
            )
        sv = simulate_dense(circuit, [0] * circuit.num_qubits)
        final = None
        fidelity, max_chi = 1.0, 0
        amplitudes = sv.amplitudes
    else:
        raise ValueError(f"unknown backend {backend!r}")
    sim_time = time.perf_counter() - t1

    t_count = report.register_map["counting"][1] + 1
    samples: list[int] = []
    outcome = ShorOutcome(None, None, "retry")
    t2 = time.perf_counter()
    for _ in range(max_attempts):
        if backend == "statevector":
            probs = np.abs(amplitudes) ** 2
            idx = int(rng.choice(len(probs), p=probs / probs.sum()))
            nq = circuit.num_qubits
            bits = [(idx >> (nq - 1 - q)) & 1 for q in range(t_count)]
        else:
            bits = final.sample_bits(t_count, rng)
        measured = sum(bit << j for j, bit in enumerate(bits))
        samples.append(measured)
        outcome = postprocess(measured, t_count, concrete)
        if outcome.status == "factors":
            break
    sample_time = time.perf_counter() - t2
    return ShorRunResult(
        n_to_factor=params.n_to_factor,
        base=base,
        backend=backend,
        factors=outcome.factors,
        order=outcome.order,
        attempts=len(samples),
        samples=samples,
        report=report,
        build_time_s=build_time,
        sim_time_s=sim_time,
        sample_time_s=sample_time,
        fidelity_estimate=fidelity,
        max_chi=max_chi,
    )
