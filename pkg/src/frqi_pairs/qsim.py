"""Minimal dense statevector simulator.

Conventions used throughout the package:

* Qubit 0 is the least significant bit of the basis-state index
  (little-endian).  Basis state ``|b_{v-1} ... b_1 b_0>`` lives at index
  ``sum_k b_k * 2**k``.
* ``RY(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]]`` and
  ``RZ(t) = diag(exp(-i t/2), exp(+i t/2))``.
* Measurement bitstrings are the binary rendering of the outcome index,
  where the k-th qubit listed in the measured subset contributes bit
  ``2**k`` (so the *last* listed qubit is the leftmost character).

Amplitudes are complex128.  Gate kernels accept either a single state of
shape ``(dim,)`` or a stack of states of shape ``(batch, dim)``; rotation
angles may then be per-row arrays.  This batched path is what makes
parameter-shift and adjoint gradients affordable in pure numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_MAX_QUBITS = 24

_SQRT1_2 = 1.0 / np.sqrt(2.0)

# index caches, keyed on (num_qubits, target, controls) / (num_qubits, qubits)
_PAIR_CACHE: dict = {}
_MARGINAL_CACHE: dict = {}


@dataclass
class StateVector:
    """Normalized amplitude vector over ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class GateOp:
    """One gate: kind in {ry, rz, h, x, cnot, cry}, plus target/controls/angle.

    ``cnot`` is sugar for an X with a single control; ``cry`` is an RY with
    an arbitrary (possibly multi-qubit) control set.  Controlled gates act
    only on basis states whose control bits are all 1.
    """

    kind: str
    target: int
    controls: tuple = ()
    angle: float = 0.0


def new_zero_state(num_qubits: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> StateVector:
    """All-zeros computational basis state |0...0>."""
    if not 1 <= num_qubits <= max_qubits:
        raise ValueError(f"num_qubits must be in [1, {max_qubits}], got {num_qubits}")
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def _pair_indices(num_qubits: int, target: int, controls: tuple = ()):
    """Indices of basis-state pairs (target bit 0 / 1) with all control bits 1."""
    key = (num_qubits, target, controls)
    hit = _PAIR_CACHE.get(key)
    if hit is not None:
        return hit
    idx = np.arange(1 << num_qubits)
    sel = (idx >> target) & 1 == 0
    for c in controls:
        sel &= (idx >> c) & 1 == 1
    idx0 = idx[sel]
    idx1 = idx0 | (1 << target)
    _PAIR_CACHE[key] = (idx0, idx1)
    return idx0, idx1


def _col(angle, amps_ndim):
    # broadcast per-row angles against (batch, npairs) slices
    if amps_ndim == 2 and np.ndim(angle) == 1:
        return np.asarray(angle)[:, None]
    return angle


def ry_(amps: np.ndarray, num_qubits: int, target: int, angle, controls: tuple = ()) -> None:
    idx0, idx1 = _pair_indices(num_qubits, target, controls)
    half = _col(angle, amps.ndim)
    c = np.cos(half * 0.5)
    s = np.sin(half * 0.5)
    a0 = amps[..., idx0]
    a1 = amps[..., idx1]
    amps[..., idx0] = c * a0 - s * a1
    amps[..., idx1] = s * a0 + c * a1


def rz_(amps: np.ndarray, num_qubits: int, target: int, angle, controls: tuple = ()) -> None:
    idx0, idx1 = _pair_indices(num_qubits, target, controls)
    half = _col(angle, amps.ndim)
    phase = np.exp(-0.5j * half)
    amps[..., idx0] = phase * amps[..., idx0]
    amps[..., idx1] = np.conj(phase) * amps[..., idx1]


def h_(amps: np.ndarray, num_qubits: int, target: int, controls: tuple = ()) -> None:
    idx0, idx1 = _pair_indices(num_qubits, target, controls)
    a0 = amps[..., idx0]
    a1 = amps[..., idx1]
    amps[..., idx0] = (a0 + a1) * _SQRT1_2
    amps[..., idx1] = (a0 - a1) * _SQRT1_2


def x_(amps: np.ndarray, num_qubits: int, target: int, controls: tuple = ()) -> None:
    idx0, idx1 = _pair_indices(num_qubits, target, controls)
    a0 = amps[..., idx0].copy()
    amps[..., idx0] = amps[..., idx1]
    amps[..., idx1] = a0


def _validate_gate(gate: GateOp, num_qubits: int) -> None:
    indices = (gate.target,) + tuple(gate.controls)
    for q in indices:
        if not 0 <= q < num_qubits:
            raise ValueError(f"qubit index {q} out of range for {num_qubits} qubits")
    if gate.target in gate.controls:
        raise ValueError(f"target {gate.target} repeated in controls {gate.controls}")
    if len(set(gate.controls)) != len(gate.controls):
        raise ValueError(f"duplicate control qubits: {gate.controls}")
    if gate.kind in ("ry", "rz", "cry") and not np.isfinite(gate.angle):
        raise ValueError(f"non-finite gate angle: {gate.angle}")


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply one gate, returning a new StateVector (input is untouched)."""
    _validate_gate(gate, state.num_qubits)
    kind = gate.kind
    controls = tuple(gate.controls)
    if kind == "cnot":
        if len(controls) != 1:
            raise ValueError("cnot requires exactly one control qubit")
        kind = "x"
    elif kind == "cry":
        if not controls:
            raise ValueError("cry requires at least one control qubit")
        kind = "ry"
    amps = state.amplitudes.copy()
    if kind == "ry":
        ry_(amps, state.num_qubits, gate.target, gate.angle, controls)
    elif kind == "rz":
        rz_(amps, state.num_qubits, gate.target, gate.angle, controls)
    elif kind == "h":
        h_(amps, state.num_qubits, gate.target, controls)
    elif kind == "x":
        x_(amps, state.num_qubits, gate.target, controls)
    else:
        raise ValueError(f"unknown gate kind: {gate.kind}")
    return StateVector(state.num_qubits, amps)


def _marginal_key(num_qubits: int, qubits: tuple) -> np.ndarray:
    key = (num_qubits, qubits)
    hit = _MARGINAL_CACHE.get(key)
    if hit is not None:
        return hit
    idx = np.arange(1 << num_qubits)
    out = np.zeros_like(idx)
    for k, q in enumerate(qubits):
        out |= ((idx >> q) & 1) << k
    _MARGINAL_CACHE[key] = out
    return out


def probabilities(state: StateVector, qubits) -> np.ndarray:
    """Born-rule marginal distribution over the listed qubits.

    Outcome index o has bit ``2**k`` set iff the k-th listed qubit is 1.
    """
    q = tuple(qubits)
    if len(q) == 0:
        raise ValueError("qubit subset must be nonempty")
    if len(set(q)) != len(q):
        raise ValueError(f"duplicate qubits in subset: {q}")
    for qi in q:
        if not 0 <= qi < state.num_qubits:
            raise ValueError(f"qubit index {qi} out of range")
    p_full = np.abs(state.amplitudes) ** 2
    keys = _marginal_key(state.num_qubits, q)
    return np.bincount(keys, weights=p_full, minlength=1 << len(q))


@dataclass
class ShotCounts:
    """Outcome -> count map over bitstrings of the measured qubit subset."""

    counts: dict
    total_shots: int
    num_bits: int

    def as_vector(self) -> np.ndarray:
        vec = np.zeros(1 << self.num_bits, dtype=np.int64)
        for bits, c in self.counts.items():
            vec[int(bits, 2)] = c
        return vec


def bitstring(outcome: int, num_bits: int) -> str:
    return format(outcome, f"0{num_bits}b")


def sample(state: StateVector, qubits, shots: int, seed: int) -> ShotCounts:
    """Draw i.i.d. measurement outcomes; same seed + state => same counts."""
    q = tuple(qubits)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    p = probabilities(state, q)
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    vec = rng.multinomial(shots, p)
    counts = {bitstring(o, len(q)): int(c) for o, c in enumerate(vec) if c > 0}
    return ShotCounts(counts=counts, total_shots=shots, num_bits=len(q))


def expectation_z(state: StateVector, qubit: int) -> float:
    """<Z> = P(0) - P(1) for one qubit."""
    p = probabilities(state, (qubit,))
    return float(p[0] - p[1])


def dump_amplitudes_csv(state: StateVector, path) -> None:
    """Debug dump: rows ``index,real,imag``."""
    with open(path, "w") as fh:
        fh.write("index,real,imag\n")
        for i, a in enumerate(state.amplitudes):
            fh.write(f"{i},{float(a.real)!r},{float(a.imag)!r}\n")


def write_shot_csv(counts: ShotCounts, path) -> None:
    """Shot dump: rows ``bitstring,count``, sorted by bitstring."""
    with open(path, "w") as fh:
        fh.write("bitstring,count\n")
        for bits in sorted(counts.counts):
            fh.write(f"{bits},{counts.counts[bits]}\n")


def read_shot_csv(path) -> ShotCounts:
    counts = {}
    num_bits = 0
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "bitstring,count":
            raise ValueError(f"bad shot CSV header: {header.strip()!r}")
        for line in fh:
            if not line.strip():
                continue
            bits, c = line.strip().split(",")
            counts[bits] = int(c)
            num_bits = max(num_bits, len(bits))
    return ShotCounts(counts=counts, total_shots=sum(counts.values()), num_bits=num_bits)
