"""FRQI image codec: angle scaling, state preparation, retrieval.

Register layout for a ``2**n x 2**n`` image (shared with the model code):

* qubit 0 -- color qubit
* qubits ``1 .. n`` -- X-position bits (column index, little-endian)
* qubits ``n+1 .. 2n`` -- Y-position bits (row index, little-endian)

The flattened position index is ``x = row * 2**n + col``, so a basis state
of the full register is ``index = color + 2 * x`` and the encoded state has
amplitude ``cos(theta_x) / 2**n`` at ``2x`` and ``sin(theta_x) / 2**n`` at
``2x + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .qsim import GateOp, ShotCounts, StateVector

COLOR_QUBIT = 0


@dataclass
class PixelImage:
    """Integer-intensity grayscale raster, row-major, values 0..255."""

    width: int
    height: int
    intensities: np.ndarray  # shape (height * width,), uint8

    @classmethod
    def from_array(cls, arr) -> "PixelImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("pixel intensities must lie in 0..255")
        h, w = arr.shape
        return cls(width=w, height=h, intensities=arr.astype(np.uint8).reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.intensities.reshape(self.height, self.width)


@dataclass
class AngleImage:
    """Per-pixel rotation angles theta_x in [0, pi/2], length 4**n."""

    n: int
    angles: np.ndarray
    support: np.ndarray | None = None  # per-position shot counts, when retrieved

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.shape != (1 << (2 * self.n),):
            raise ValueError(
                f"expected {1 << (2 * self.n)} angles for n={self.n}, "
                f"got shape {self.angles.shape}"
            )
        if self.angles.min() < -1e-12 or self.angles.max() > np.pi / 2 + 1e-12:
            raise ValueError("angles must lie in [0, pi/2]")


def side_exponent(side: int) -> int:
    n = int(side).bit_length() - 1
    if side < 2 or (1 << n) != side:
        raise ValueError(f"side length must be a power of two >= 2, got {side}")
    return n


def pad_to_envelope(img: PixelImage) -> PixelImage:
    """Zero-pad to the next square power-of-two envelope (e.g. 28x28 -> 32x32)."""
    side = max(img.width, img.height, 2)
    target = 1 << (side - 1).bit_length()
    if img.width == img.height == target:
        return img
    arr = np.zeros((target, target), dtype=np.uint8)
    arr[: img.height, : img.width] = img.as_array()
    return PixelImage.from_array(arr)


def scale_to_angles(img: PixelImage) -> AngleImage:
    """Map intensities 0..255 uniformly onto [0, pi/2]."""
    if img.width != img.height:
        raise ValueError(f"image must be square, got {img.width}x{img.height}")
    n = side_exponent(img.width)
    angles = img.intensities.astype(np.float64) / 255.0 * (np.pi / 2)
    return AngleImage(n=n, angles=angles)


def angles_to_image(angles: AngleImage) -> PixelImage:
    """Inverse of scale_to_angles, rounding to the nearest intensity level."""
    side = 1 << angles.n
    vals = np.rint(angles.angles / (np.pi / 2) * 255.0)
    vals = np.clip(vals, 0, 255).astype(np.uint8)
    return PixelImage(width=side, height=side, intensities=vals)


def qubit_budget(n: int) -> int:
    """Register size for a 2**n x 2**n image: 2n position qubits + 1 color qubit."""
    if n < 1:
        raise ValueError(f"side exponent must be >= 1, got {n}")
    return 2 * n + 1


def encode_direct(angles: AngleImage) -> StateVector:
    """Write the encoded amplitudes directly (the codec's reference path)."""
    n = angles.n
    num_qubits = qubit_budget(n)
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    scale = 1.0 / (1 << n)
    amps[0::2] = np.cos(angles.angles) * scale
    amps[1::2] = np.sin(angles.angles) * scale
    return StateVector(num_qubits, amps)


def encode_circuit(angles: AngleImage) -> StateVector:
    """Prepare the same state by gates: H wall + one multi-controlled RY per pixel.

    Position controls condition on the register equal to x, realized by
    sandwiching the all-ones-controlled RY(2 theta_x) between X gates on the
    zero bits of x.
    """
    n = angles.n
    num_qubits = qubit_budget(n)
    position_qubits = tuple(range(1, num_qubits))
    state = qsim.new_zero_state(num_qubits)
    for q in position_qubits:
        state = qsim.apply_gate(state, GateOp("h", q))
    for x in range(1 << (2 * n)):
        theta = angles.angles[x]
        if theta == 0.0:
            continue  # controlled-RY(0) is the identity
        zero_bits = [q for k, q in enumerate(position_qubits) if not (x >> k) & 1]
        for q in zero_bits:
            state = qsim.apply_gate(state, GateOp("x", q))
        state = qsim.apply_gate(
            state, GateOp("cry", COLOR_QUBIT, controls=position_qubits, angle=2.0 * theta)
        )
        for q in zero_bits:
            state = qsim.apply_gate(state, GateOp("x", q))
    return state


def retrieve_analytic(state: StateVector, n: int) -> AngleImage:
    """Recover angles from amplitude magnitudes: atan2(|sin branch|, |cos branch|)."""
    if state.num_qubits != qubit_budget(n):
        raise ValueError(
            f"state has {state.num_qubits} qubits, expected {qubit_budget(n)} for n={n}"
        )
    c0 = np.abs(state.amplitudes[0::2])
    c1 = np.abs(state.amplitudes[1::2])
    dead = (c0 + c1) < 1e-12
    if dead.any():
        raise ValueError(
            f"malformed FRQI state: zero amplitude at positions {np.nonzero(dead)[0][:8]}"
        )
    theta = np.arctan2(c1, c0)
    return AngleImage(n=n, angles=np.clip(theta, 0.0, np.pi / 2))


def measure_all(state: StateVector, n: int, shots: int, seed: int) -> ShotCounts:
    """Measure the full FRQI register (color qubit first in the bit order)."""
    return qsim.sample(state, tuple(range(qubit_budget(n))), shots, seed)


def retrieve_from_shots(counts: ShotCounts, n: int) -> AngleImage:
    """Maximum-likelihood angle estimate from full-register shot counts.

    theta_x = atan2(sqrt(count(color=1, x)), sqrt(count(color=0, x))); positions
    that were never sampled get theta = 0 and support 0 (the caller can inspect
    ``result.support`` to spot them).
    """
    if counts.total_shots == 0:
        raise ValueError("cannot retrieve from zero shots")
    if counts.num_bits != qubit_budget(n):
        raise ValueError(
            f"counts cover {counts.num_bits} qubits, expected {qubit_budget(n)}"
        )
    num_positions = 1 << (2 * n)
    c = np.zeros((num_positions, 2), dtype=np.float64)
    for bits, k in counts.counts.items():
        outcome = int(bits, 2)
        c[outcome >> 1, outcome & 1] += k
    support = c.sum(axis=1)
    theta = np.zeros(num_positions)
    seen = support > 0
    theta[seen] = np.arctan2(np.sqrt(c[seen, 1]), np.sqrt(c[seen, 0]))
    return AngleImage(n=n, angles=np.clip(theta, 0.0, np.pi / 2), support=support.astype(np.int64))


def write_angles_csv(angles: AngleImage, path) -> None:
    with open(path, "w") as fh:
        fh.write("position,angle\n")
        for x, t in enumerate(angles.angles):
            fh.write(f"{x},{float(t)!r}\n")


# ---------------------------------------------------------------------------
# PGM image I/O (P2 ascii / P5 binary, maxval 255)

def read_pgm(path) -> PixelImage:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        if data[i : i + 1] == b"#":  # comment to end of line
            while i < len(data) and data[i] not in b"\r\n":
                i += 1
        elif data[i : i + 1].isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4:
        raise ValueError(f"truncated PGM header in {path}")
    magic = tokens[0]
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval != 255:
        raise ValueError(f"only maxval 255 PGM supported, got {maxval}")
    if magic == b"P5":
        raw = data[i + 1 : i + 1 + width * height]
        if len(raw) < width * height:
            raise ValueError(f"truncated P5 pixel data in {path}")
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    elif magic == b"P2":
        vals = data[i:].split()
        if len(vals) < width * height:
            raise ValueError(f"truncated P2 pixel data in {path}")
        arr = np.array([int(v) for v in vals[: width * height]], dtype=np.uint8)
        arr = arr.reshape(height, width)
    else:
        raise ValueError(f"not a PGM file (magic {magic!r})")
    return PixelImage.from_array(arr)


def write_pgm(img: PixelImage, path, binary: bool = True) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n" if binary else f"P2\n{img.width} {img.height}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(img.intensities.tobytes())
        else:
            arr = img.as_array()
            for row in arr:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))
