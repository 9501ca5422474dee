"""QRNN classifier architectures over a memory register joined to an FRQI register.

Three variants:

* ``single-cell`` -- one cell reading every FRQI qubit, applied once.
* ``naive`` -- the single cell repeated ``repetitions`` times (fresh
  parameters per repetition).
* ``frqi-pairs`` -- one cell per (x, y) position-qubit combination, each
  reading {color, x_i, y_j}; ``cross`` pairing yields n**2 cells,
  ``triangular`` pairing yields n(n+1)/2 (six cells at n=3).

Cell template (per deep layer): controlled-RY couplings from every input
qubit onto every memory qubit, then RY+RZ on each memory qubit, then a CNOT
ring over the memory register.  Classification features are read from the
memory register and fed through an affine softmax head.

Memory qubits sit above the FRQI register: indices ``2n+1 .. 2n+memory``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import qsim
from .frqi import AngleImage, encode_direct, qubit_budget

LAYOUT_VERSION = "fqp-layout-1"

VARIANTS = ("single-cell", "naive", "frqi-pairs")
PAIRINGS = ("cross", "triangular")
FEATURE_MODES = ("basis-probs", "per-qubit-z")


@dataclass(frozen=True)
class HeadConfig:
    feature_mode: str = "basis-probs"
    bias: bool = False


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "frqi-pairs"
    memory_qubits: int = 4
    deep_layers: int = 1
    n: int = 3
    num_classes: int = 10
    pairing: str = "cross"
    repetitions: int = 2  # naive variant only
    head: HeadConfig = field(default_factory=HeadConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.pairing not in PAIRINGS:
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if self.head.feature_mode not in FEATURE_MODES:
            raise ValueError(f"unknown feature mode {self.head.feature_mode!r}")
        if self.memory_qubits < 1 or self.deep_layers < 1 or self.num_classes < 2:
            raise ValueError("memory_qubits >= 1, deep_layers >= 1, num_classes >= 2 required")
        if self.n < 1:
            raise ValueError(f"side exponent must be >= 1, got {self.n}")
        if self.variant == "naive" and self.repetitions < 1:
            raise ValueError("naive variant needs repetitions >= 1")

    @property
    def frqi_qubits(self) -> int:
        return qubit_budget(self.n)

    @property
    def total_qubits(self) -> int:
        return self.frqi_qubits + self.memory_qubits

    @property
    def memory_register(self) -> tuple:
        return tuple(range(self.frqi_qubits, self.total_qubits))

    def feature_dim(self) -> int:
        if self.head.feature_mode == "basis-probs":
            return 1 << self.memory_qubits
        return self.memory_qubits


def build_cell_schedule(config: ModelConfig) -> list:
    """Ordered input-qubit sets, one per cell."""
    n = config.n
    x_qubits = [1 + i for i in range(n)]
    y_qubits = [n + 1 + j for j in range(n)]
    if config.variant == "frqi-pairs":
        cells = []
        for i in range(n):
            j_range = range(n) if config.pairing == "cross" else range(i, n)
            for j in j_range:
                cells.append((0, x_qubits[i], y_qubits[j]))
        return cells
    all_inputs = tuple(range(config.frqi_qubits))
    if config.variant == "single-cell":
        return [all_inputs]
    return [all_inputs] * config.repetitions  # naive


@dataclass(frozen=True)
class ProgGate:
    kind: str  # "cry", "ry", "rz", "cnot"
    target: int
    controls: tuple = ()
    param: int = -1  # index into the PQC parameter block, -1 for fixed gates


def build_program(config: ModelConfig):
    """Flatten the cell schedule into one gate list plus a parameter layout.

    Returns (gates, num_pqc_params, layout) where layout[k] names parameter k
    as (cell, layer, role, ...) tuples.
    """
    mem = config.memory_register
    gates = []
    layout = []
    k = 0
    for cell_idx, inputs in enumerate(build_cell_schedule(config)):
        for layer in range(config.deep_layers):
            for q_in in inputs:
                for q_m in mem:
                    gates.append(ProgGate("cry", q_m, (q_in,), k))
                    layout.append(("cell", cell_idx, layer, "coupling", q_in, q_m))
                    k += 1
            for q_m in mem:
                gates.append(ProgGate("ry", q_m, (), k))
                layout.append(("cell", cell_idx, layer, "mix-ry", q_m))
                k += 1
                gates.append(ProgGate("rz", q_m, (), k))
                layout.append(("cell", cell_idx, layer, "mix-rz", q_m))
                k += 1
            if len(mem) >= 2:
                for t in range(len(mem)):
                    gates.append(ProgGate("cnot", mem[(t + 1) % len(mem)], (mem[t],)))
    return gates, k, layout


def count_parameters(config: ModelConfig):
    """(pqc_count, head_count)."""
    _, pqc, _ = build_program(config)
    head = config.num_classes * (config.feature_dim() + (1 if config.head.bias else 0))
    return pqc, head


@dataclass
class ParamVector:
    """Flat trainable parameters: PQC block first, then head weights (+ bias)."""

    values: np.ndarray
    layout_version: str = LAYOUT_VERSION

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layout_version)


def num_parameters(config: ModelConfig) -> int:
    pqc, head = count_parameters(config)
    return pqc + head


def init_params(config: ModelConfig, seed: int) -> ParamVector:
    """Small uniform angles for rotations, zeros for the head."""
    pqc, head = count_parameters(config)
    rng = np.random.default_rng(seed)
    values = np.concatenate([rng.uniform(-np.pi / 10, np.pi / 10, size=pqc), np.zeros(head)])
    return ParamVector(values)


def split_params(config: ModelConfig, params: ParamVector):
    """-> (pqc values, weight matrix (classes, features), bias or None)."""
    pqc, head = count_parameters(config)
    if params.values.shape != (pqc + head,):
        raise ValueError(
            f"parameter vector has length {params.values.shape}, expected {pqc + head}"
        )
    fdim = config.feature_dim()
    c = config.num_classes
    pqc_vals = params.values[:pqc]
    w = params.values[pqc : pqc + c * fdim].reshape(c, fdim)
    b = params.values[pqc + c * fdim :] if config.head.bias else None
    return pqc_vals, w, b


def describe_parameter(config: ModelConfig, index: int):
    """Stable human-readable location of one flat parameter."""
    pqc, head = count_parameters(config)
    if not 0 <= index < pqc + head:
        raise ValueError(f"parameter index {index} out of range")
    if index < pqc:
        _, _, layout = build_program(config)
        return layout[index]
    fdim = config.feature_dim()
    k = index - pqc
    if k < config.num_classes * fdim:
        return ("head", "weight", k // fdim, k % fdim)
    return ("head", "bias", k - config.num_classes * fdim)


def run_program(amps: np.ndarray, config: ModelConfig, gates, pqc_values, angle_rows=None) -> None:
    """Apply the cell program in place.

    ``amps`` is (dim,) or (rows, dim).  ``angle_rows``, when given, is a
    (rows, num_pqc_params) matrix of per-row angles (used for batched
    parameter-shift evaluations); otherwise all rows share ``pqc_values``.
    """
    nq = config.total_qubits
    for g in gates:
        if g.kind == "cnot":
            qsim.x_(amps, nq, g.target, g.controls)
            continue
        angle = pqc_values[g.param] if angle_rows is None else angle_rows[:, g.param]
        if g.kind == "cry" or g.kind == "ry":
            qsim.ry_(amps, nq, g.target, angle, g.controls)
        elif g.kind == "rz":
            qsim.rz_(amps, nq, g.target, angle, g.controls)
        else:
            raise ValueError(f"unknown program gate {g.kind}")


def lift_frqi_state(config: ModelConfig, angles: AngleImage) -> np.ndarray:
    """|0...0>_memory tensor encode_direct(angles), as a raw amplitude array."""
    if angles.n != config.n:
        raise ValueError(f"image side exponent {angles.n} does not match config n={config.n}")
    frqi_state = encode_direct(angles)
    amps = np.zeros(1 << config.total_qubits, dtype=np.complex128)
    amps[: frqi_state.amplitudes.size] = frqi_state.amplitudes
    return amps


_Z_SIGN_CACHE: dict = {}


def _z_signs(memory_qubits: int) -> np.ndarray:
    """(m, 2**m) matrix of +/-1: sign of Z on qubit i for memory basis index k."""
    hit = _Z_SIGN_CACHE.get(memory_qubits)
    if hit is not None:
        return hit
    k = np.arange(1 << memory_qubits)
    signs = np.stack([1.0 - 2.0 * ((k >> i) & 1) for i in range(memory_qubits)])
    _Z_SIGN_CACHE[memory_qubits] = signs
    return signs


def memory_basis_probs(amps: np.ndarray, config: ModelConfig) -> np.ndarray:
    """Marginal distribution over the memory register (memory bits are the
    high bits, so this is a reshape + sum)."""
    p = np.abs(amps) ** 2
    lead = p.shape[:-1]
    return p.reshape(*lead, 1 << config.memory_qubits, -1).sum(axis=-1)


def features_from_memory_probs(probs_mem: np.ndarray, config: ModelConfig) -> np.ndarray:
    if config.head.feature_mode == "basis-probs":
        # scaled by 2**m so features average 1 regardless of register size;
        # a pure reparametrization of the affine head, but it keeps Adam's
        # per-weight steps commensurate with the logit scale
        return probs_mem * (1 << config.memory_qubits)
    return probs_mem @ _z_signs(config.memory_qubits).T


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def head_logits(features: np.ndarray, w: np.ndarray, b) -> np.ndarray:
    logits = features @ w.T
    if b is not None:
        logits = logits + b
    return logits


def forward(config: ModelConfig, params: ParamVector, angles: AngleImage,
            shots: int | None = None, seed: int = 0) -> np.ndarray:
    """Class-probability vector for one image.

    Feature readout is analytic by default; passing ``shots`` replaces the
    exact memory marginal with a seeded finite-shot estimate.
    """
    pqc_vals, w, b = split_params(config, params)
    gates, _, _ = build_program(config)
    amps = lift_frqi_state(config, angles)
    run_program(amps, config, gates, pqc_vals)
    if shots is None:
        probs_mem = memory_basis_probs(amps, config)
    else:
        counts = qsim.sample(
            qsim.StateVector(config.total_qubits, amps), config.memory_register, shots, seed
        )
        probs_mem = counts.as_vector().astype(np.float64) / counts.total_shots
    feats = features_from_memory_probs(probs_mem, config)
    return softmax(head_logits(feats, w, b))


def forward_batch(config: ModelConfig, params: ParamVector, angles_batch: np.ndarray,
                  chunk: int = 512) -> np.ndarray:
    """Vectorized forward over a (num_samples, 4**n) angle matrix."""
    pqc_vals, w, b = split_params(config, params)
    gates, _, _ = build_program(config)
    out = []
    for start in range(0, angles_batch.shape[0], chunk):
        block = angles_batch[start : start + chunk]
        amps = np.stack([lift_frqi_state(config, AngleImage(config.n, a)) for a in block])
        run_program(amps, config, gates, pqc_vals)
        feats = features_from_memory_probs(memory_basis_probs(amps, config), config)
        out.append(softmax(head_logits(feats, w, b)))
    return np.concatenate(out, axis=0)


# ---------------------------------------------------------------------------
# checkpoints

def _config_to_dict(config: ModelConfig) -> dict:
    d = asdict(config)
    d["head"] = asdict(config.head)
    return d


def _config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    d["head"] = HeadConfig(**d["head"])
    return ModelConfig(**d)


def save_checkpoint(path, config: ModelConfig, params: ParamVector, extra: dict | None = None) -> None:
    payload = {
        "format": "fqp-checkpoint",
        "layout_version": params.layout_version,
        "config": _config_to_dict(config),
        "params": [float(v) for v in params.values],
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


class CheckpointError(Exception):
    pass


def load_checkpoint(path):
    """-> (ModelConfig, ParamVector).  Exact round-trip of decimal doubles."""
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if payload.get("format") != "fqp-checkpoint":
        raise CheckpointError(f"{path} is not a checkpoint file")
    if payload.get("layout_version") != LAYOUT_VERSION:
        raise CheckpointError(
            f"layout version {payload.get('layout_version')!r} unsupported "
            f"(expected {LAYOUT_VERSION!r})"
        )
    config = _config_from_dict(payload["config"])
    values = np.array(payload["params"], dtype=np.float64)
    if values.shape != (num_parameters(config),):
        raise CheckpointError(
            f"checkpoint holds {values.size} parameters, config needs {num_parameters(config)}"
        )
    return config, ParamVector(values)
