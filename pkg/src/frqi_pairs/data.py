"""MNIST-format ingestion and preprocessing into angle-image datasets.

IDX files (plain or gzipped) are parsed with the canonical big-endian
layout.  Preprocessed datasets can be cached in a small binary format:

* bytes 0..3   magic ``b"FQP1"``
* bytes 4..7   little-endian uint32 sample count
* bytes 8..11  little-endian uint32 side exponent n
* then ``count * 4**n`` little-endian float64 angles, row-major per sample
* then ``count`` uint8 labels
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
CACHE_MAGIC = b"FQP1"

RESIZE_FILTERS = ("bilinear", "area")


class MnistFormatError(Exception):
    pass


class BadMagicError(MnistFormatError):
    pass


class TruncatedFileError(MnistFormatError):
    pass


class CountMismatchError(MnistFormatError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (count, side, side) uint8
    labels: np.ndarray  # (count,) uint8
    split: str = ""

    def __len__(self):
        return len(self.labels)


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(fh) as gz:
                return gz.read()
        return fh.read()


def _take(buf: bytes, offset: int, count: int, path) -> bytes:
    if offset + count > len(buf):
        raise TruncatedFileError(
            f"{path}: needed {count} bytes at offset {offset}, file has {len(buf)}"
        )
    return buf[offset : offset + count]


def load_idx(images_path, labels_path, split: str = "") -> Dataset:
    """Parse an IDX image/label file pair (plain or .gz)."""
    ibuf = _read_bytes(images_path)
    magic, count, rows, cols = struct.unpack(">IIII", _take(ibuf, 0, 16, images_path))
    if magic != IMAGES_MAGIC:
        raise BadMagicError(f"{images_path}: magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")
    pixels = _take(ibuf, 16, count * rows * cols, images_path)
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols)

    lbuf = _read_bytes(labels_path)
    lmagic, lcount = struct.unpack(">II", _take(lbuf, 0, 8, labels_path))
    if lmagic != LABELS_MAGIC:
        raise BadMagicError(f"{labels_path}: magic {lmagic:#010x}, expected {LABELS_MAGIC:#010x}")
    if lcount != count:
        raise CountMismatchError(
            f"label count {lcount} does not match image count {count}"
        )
    labels = np.frombuffer(_take(lbuf, 8, lcount, labels_path), dtype=np.uint8)
    if labels.max(initial=0) > 9:
        raise MnistFormatError(f"{labels_path}: label values exceed 9")
    return Dataset(images=images.copy(), labels=labels.copy(), split=split)


def save_idx(dataset: Dataset, images_path, labels_path) -> None:
    """Write a Dataset back out as IDX (gzipped when the path ends in .gz)."""
    count, rows, cols = dataset.images.shape

    def _open(path):
        return gzip.open(path, "wb") if str(path).endswith(".gz") else open(path, "wb")

    with _open(images_path) as fh:
        fh.write(struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols))
        fh.write(dataset.images.astype(np.uint8).tobytes())
    with _open(labels_path) as fh:
        fh.write(struct.pack(">II", LABELS_MAGIC, count))
        fh.write(dataset.labels.astype(np.uint8).tobytes())


_MNIST_STEMS = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_mnist_files(directory, split: str):
    """Locate the canonical file pair for a split, preferring gzipped files."""
    stems = _MNIST_STEMS.get(split)
    if stems is None:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    paths = []
    for stem in stems:
        for cand in (stem + ".gz", stem, stem.replace("-idx", ".idx")):
            p = os.path.join(directory, cand)
            if os.path.exists(p):
                paths.append(p)
                break
        else:
            raise FileNotFoundError(f"no {stem}[.gz] under {directory}")
    return tuple(paths)


def load_mnist(directory, split: str) -> Dataset:
    images_path, labels_path = find_mnist_files(directory, split)
    return load_idx(images_path, labels_path, split=split)


# ---------------------------------------------------------------------------
# resizing

_WEIGHT_CACHE: dict = {}


def _bilinear_weights(src: int, dst: int) -> np.ndarray:
    key = ("bilinear", src, dst)
    hit = _WEIGHT_CACHE.get(key)
    if hit is not None:
        return hit
    w = np.zeros((dst, src))
    centers = (np.arange(dst) + 0.5) * src / dst - 0.5
    lo = np.floor(centers).astype(int)
    frac = centers - lo
    for i in range(dst):
        w[i, np.clip(lo[i], 0, src - 1)] += 1.0 - frac[i]
        w[i, np.clip(lo[i] + 1, 0, src - 1)] += frac[i]
    _WEIGHT_CACHE[key] = w
    return w


def _area_weights(src: int, dst: int) -> np.ndarray:
    key = ("area", src, dst)
    hit = _WEIGHT_CACHE.get(key)
    if hit is not None:
        return hit
    w = np.zeros((dst, src))
    step = src / dst
    for i in range(dst):
        left, right = i * step, (i + 1) * step
        for j in range(int(np.floor(left)), int(np.ceil(right))):
            overlap = min(right, j + 1) - max(left, j)
            if overlap > 0:
                w[i, j] = overlap / step
    _WEIGHT_CACHE[key] = w
    return w


def resize_array(img: np.ndarray, target: int, filt: str = "bilinear") -> np.ndarray:
    """Downscale a square image to ``target``; 28 -> 32 zero-pads a 2px border."""
    if filt not in RESIZE_FILTERS:
        raise ValueError(f"unknown resize filter {filt!r}")
    src = img.shape[0]
    if img.shape != (src, src):
        raise ValueError(f"expected a square image, got {img.shape}")
    if target == src:
        return img.copy()
    if target == 32:
        if src != 28:
            raise ValueError(f"32x32 target expects a 28x28 source, got {src}x{src}")
        out = np.zeros((32, 32), dtype=np.uint8)
        out[2:30, 2:30] = img
        return out
    if target not in (8, 16) or target > src:
        raise ValueError(f"unsupported resize target {target} from {src}x{src}")
    w = _bilinear_weights(src, target) if filt == "bilinear" else _area_weights(src, target)
    vals = w @ img.astype(np.float64) @ w.T
    return np.clip(np.rint(vals), 0, 255).astype(np.uint8)


def resize_dataset(dataset: Dataset, target: int, filt: str = "bilinear") -> Dataset:
    images = np.stack([resize_array(im, target, filt) for im in dataset.images])
    return Dataset(images=images, labels=dataset.labels.copy(), split=dataset.split)


# ---------------------------------------------------------------------------
# subsetting and angle conversion

def subset(dataset: Dataset, per_class: int, seed: int) -> Dataset:
    """Class-balanced seeded subset, preserving original order within class."""
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in np.unique(dataset.labels):
        idx = np.nonzero(dataset.labels == cls)[0]
        if len(idx) < per_class:
            raise ValueError(
                f"class {cls} has only {len(idx)} samples, need {per_class}"
            )
        pick = rng.choice(len(idx), size=per_class, replace=False)
        chosen.append(np.sort(idx[pick]))
    sel = np.concatenate(chosen)
    return Dataset(images=dataset.images[sel], labels=dataset.labels[sel], split=dataset.split)


def filter_classes(dataset: Dataset, classes) -> Dataset:
    """Keep the listed digit classes, relabeled to 0..k-1 in the given order."""
    classes = list(classes)
    remap = {c: i for i, c in enumerate(classes)}
    keep = np.isin(dataset.labels, classes)
    labels = np.array([remap[int(v)] for v in dataset.labels[keep]], dtype=np.uint8)
    return Dataset(images=dataset.images[keep], labels=labels, split=dataset.split)


@dataclass
class AngleDataset:
    n: int
    angles: np.ndarray  # (count, 4**n) float64
    labels: np.ndarray  # (count,) uint8

    def __len__(self):
        return len(self.labels)


def to_angles(dataset: Dataset) -> AngleDataset:
    side = dataset.images.shape[1]
    n = int(side).bit_length() - 1
    if (1 << n) != side:
        raise ValueError(f"image side {side} is not a power of two; resize or pad first")
    angles = dataset.images.reshape(len(dataset), -1).astype(np.float64) / 255.0 * (np.pi / 2)
    return AngleDataset(n=n, angles=angles, labels=dataset.labels.copy())


def save_cache(angle_dataset: AngleDataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", len(angle_dataset), angle_dataset.n))
        fh.write(angle_dataset.angles.astype("<f8").tobytes())
        fh.write(angle_dataset.labels.astype(np.uint8).tobytes())


def load_cache(path) -> AngleDataset:
    buf = _read_bytes(path)
    if buf[:4] != CACHE_MAGIC:
        raise BadMagicError(f"{path}: magic {buf[:4]!r}, expected {CACHE_MAGIC!r}")
    count, n = struct.unpack("<II", _take(buf, 4, 8, path))
    body = _take(buf, 12, count * (1 << (2 * n)) * 8, path)
    angles = np.frombuffer(body, dtype="<f8").reshape(count, 1 << (2 * n))
    labels = np.frombuffer(
        _take(buf, 12 + len(body), count, path), dtype=np.uint8
    )
    return AngleDataset(n=n, angles=angles.copy(), labels=labels.copy())
