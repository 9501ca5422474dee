import numpy as np
import pytest

from frqi_pairs import data, qsim

from _digits import ensure_digit_dir


@pytest.fixture(scope="session")
def digit_dir(tmp_path_factory):
    """Directory of MNIST-format IDX files: MNIST_DIR if set, else the
    handwritten-digits fixture."""
    return ensure_digit_dir(str(tmp_path_factory.mktemp("digits")))


@pytest.fixture(scope="session")
def digit_splits(digit_dir):
    train = data.load_mnist(digit_dir, "train")
    test = data.load_mnist(digit_dir, "test")
    return train, test


def prep_angles(dataset, classes=10, per_class=None, seed=0, side=8):
    """Shared preprocessing: filter classes, balanced subset, resize, angles."""
    if classes < 10:
        dataset = data.filter_classes(dataset, range(classes))
    if per_class is not None:
        dataset = data.subset(dataset, per_class, seed)
    dataset = data.resize_dataset(dataset, side)
    return data.to_angles(dataset)


def random_gate(rng, num_qubits):
    kind = rng.choice(["ry", "rz", "h", "x", "cnot", "cry"])
    target = int(rng.integers(num_qubits))
    others = [q for q in range(num_qubits) if q != target]
    if kind == "cnot":
        controls = (int(rng.choice(others)),)
    elif kind == "cry":
        k = int(rng.integers(1, min(3, len(others)) + 1))
        controls = tuple(int(q) for q in rng.choice(others, size=k, replace=False))
    else:
        controls = ()
    angle = float(rng.uniform(-np.pi, np.pi)) if kind in ("ry", "rz", "cry") else 0.0
    return qsim.GateOp(kind, target, controls, angle)


def random_state(seed, num_qubits, depth=12):
    rng = np.random.default_rng(seed)
    state = qsim.new_zero_state(num_qubits)
    for _ in range(depth):
        state = qsim.apply_gate(state, random_gate(rng, num_qubits))
    return state
