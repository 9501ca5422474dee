"""Build MNIST-format IDX files from sklearn's handwritten digits.

Real MNIST is not bundled; when MNIST_DIR points at the canonical files the
suite uses them, otherwise this fixture writes an MNIST-shaped stand-in:
the 1797 8x8 handwritten digits upscaled to 28x28 plus one-pixel-shifted
copies (augmented copies of one source digit never cross the train/test
split).  Fully deterministic.
"""

import os

import numpy as np

from frqi_pairs import data

SHIFTS = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))


def _upscale(images8):
    up = np.repeat(np.repeat(images8, 3, axis=1), 3, axis=2)  # 24x24
    big = np.zeros((len(images8), 28, 28), dtype=np.uint8)
    big[:, 2:26, 2:26] = up
    return big


def build_digit_idx(directory):
    from sklearn.datasets import load_digits

    d = load_digits()
    px = np.rint(d.images * (255.0 / 16.0)).astype(np.uint8)
    big = _upscale(px)
    labels = d.target.astype(np.uint8)

    split_imgs = {"train": [], "test": []}
    split_labels = {"train": [], "test": []}
    for cls in range(10):
        idx = np.nonzero(labels == cls)[0]
        cut = int(round(0.8 * len(idx)))
        for name, members in (("train", idx[:cut]), ("test", idx[cut:])):
            for i in members:
                for dy, dx in SHIFTS:
                    img = np.roll(np.roll(big[i], dy, axis=0), dx, axis=1)
                    split_imgs[name].append(img)
                    split_labels[name].append(cls)

    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(0)
    for name, stem in (("train", "train"), ("test", "t10k")):
        imgs = np.stack(split_imgs[name])
        labs = np.array(split_labels[name], dtype=np.uint8)
        perm = rng.permutation(len(labs))
        ds = data.Dataset(images=imgs[perm], labels=labs[perm], split=name)
        data.save_idx(
            ds,
            os.path.join(directory, f"{stem}-images-idx3-ubyte.gz"),
            os.path.join(directory, f"{stem}-labels-idx1-ubyte.gz"),
        )


def ensure_digit_dir(base_dir):
    """Return a directory with MNIST-format files: MNIST_DIR if usable, else the fixture."""
    env = os.environ.get("MNIST_DIR")
    if env:
        try:
            data.find_mnist_files(env, "train")
            data.find_mnist_files(env, "test")
            return env
        except FileNotFoundError:
            pass
    marker = os.path.join(base_dir, "t10k-labels-idx1-ubyte.gz")
    if not os.path.exists(marker):
        build_digit_idx(base_dir)
    return base_dir
