import numpy as np
import pytest

from frqi_pairs import frqi, qsim
from frqi_pairs.frqi import AngleImage, PixelImage


def test_scale_endpoints_and_midpoint():
    img = PixelImage.from_array([[0, 255], [128, 17]])
    angles = frqi.scale_to_angles(img)
    assert angles.angles[0] == 0.0
    assert angles.angles[1] == np.pi / 2
    # (128/255) * pi/2, frozen from direct arithmetic
    assert abs(angles.angles[2] - (128 / 255) * (np.pi / 2)) < 1e-15
    assert abs(angles.angles[2] - 0.7884781561950853) < 1e-12


def test_scale_bijective_and_monotone():
    img = PixelImage.from_array(np.arange(256, dtype=np.uint8).reshape(16, 16))
    angles = frqi.scale_to_angles(img).angles
    assert np.all(np.diff(angles) > 0)
    back = frqi.angles_to_image(frqi.scale_to_angles(img))
    assert np.array_equal(back.intensities, img.intensities)


def test_qubit_budget():
    assert frqi.qubit_budget(3) == 7
    assert frqi.qubit_budget(2) == 5
    assert frqi.qubit_budget(5) == 11
    with pytest.raises(ValueError):
        frqi.qubit_budget(0)


def test_encode_direct_examples():
    zero = frqi.encode_direct(AngleImage(1, np.zeros(4)))
    assert np.allclose(zero.amplitudes[0::2], 0.5)
    assert np.allclose(zero.amplitudes[1::2], 0.0)
    white = frqi.encode_direct(AngleImage(1, np.full(4, np.pi / 2)))
    assert np.allclose(white.amplitudes[1::2], 0.5)
    assert np.allclose(np.abs(white.amplitudes[0::2]), 0.0, atol=1e-15)
    # theta = [pi/4, 0, 0, 0]
    s = frqi.encode_direct(AngleImage(1, np.array([np.pi / 4, 0, 0, 0])))
    assert abs(s.amplitudes[0] - np.sqrt(2) / 4) < 1e-15  # (c=0, x=0)
    assert abs(s.amplitudes[1] - np.sqrt(2) / 4) < 1e-15  # (c=1, x=0)
    for x in (1, 2, 3):
        assert abs(s.amplitudes[2 * x] - 0.5) < 1e-15
        assert s.amplitudes[2 * x + 1] == 0
    assert abs(s.norm() - 1) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_circuit_matches_direct(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        angles = AngleImage(n, rng.uniform(0, np.pi / 2, 1 << (2 * n)))
        direct = frqi.encode_direct(angles)
        circuit = frqi.encode_circuit(angles)
        assert np.abs(circuit.amplitudes - direct.amplitudes).max() < 1e-10


def test_circuit_all_zero_exact():
    # all-zero image: no color rotations fire, only the H wall remains, so the
    # two constructions differ by at most the rounding of (1/sqrt(2))**2n
    angles = AngleImage(2, np.zeros(16))
    diff = np.abs(
        frqi.encode_circuit(angles).amplitudes - frqi.encode_direct(angles).amplitudes
    )
    assert diff.max() < 1e-15


@pytest.mark.parametrize("n", [1, 2, 3])
def test_analytic_roundtrip(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(100):
        angles = AngleImage(n, rng.uniform(0, np.pi / 2, 1 << (2 * n)))
        state = frqi.encode_direct(angles)
        assert abs(state.norm() - 1) < 1e-12
        back = frqi.retrieve_analytic(state, n)
        assert np.abs(back.angles - angles.angles).max() < 1e-9


def test_retrieve_analytic_malformed():
    state = qsim.StateVector(3, np.zeros(8, dtype=complex))
    state.amplitudes[0] = 1.0  # position 1 has no amplitude at all
    with pytest.raises(ValueError):
        frqi.retrieve_analytic(state, 1)


def test_retrieve_from_shots_all_zero_image():
    state = frqi.encode_direct(AngleImage(1, np.zeros(4)))
    counts = frqi.measure_all(state, 1, 10_000, seed=0)
    est = frqi.retrieve_from_shots(counts, 1)
    assert np.all(est.angles == 0)
    assert np.all(est.support >= 0)


def test_retrieve_from_shots_midgray():
    state = frqi.encode_direct(AngleImage(1, np.full(4, np.pi / 4)))
    counts = frqi.measure_all(state, 1, 10_000, seed=5)
    est = frqi.retrieve_from_shots(counts, 1)
    assert np.abs(est.angles - np.pi / 4).max() < 0.1


def test_retrieve_from_shots_errors():
    empty = qsim.ShotCounts(counts={}, total_shots=0, num_bits=3)
    with pytest.raises(ValueError):
        frqi.retrieve_from_shots(empty, 1)
    wrong = qsim.ShotCounts(counts={"00": 10}, total_shots=10, num_bits=2)
    with pytest.raises(ValueError):
        frqi.retrieve_from_shots(wrong, 1)


def test_shot_retrieval_error_shrinks_with_shots():
    rng = np.random.default_rng(17)
    angles = AngleImage(1, rng.uniform(0.1, np.pi / 2 - 0.1, 4))
    state = frqi.encode_direct(angles)
    maes = []
    for shots in (100, 1_000, 10_000, 100_000):
        errs = []
        for seed in range(10):
            est = frqi.retrieve_from_shots(frqi.measure_all(state, 1, shots, seed), 1)
            errs.append(np.abs(est.angles - angles.angles).mean())
        maes.append(np.mean(errs))
    assert maes[0] > maes[1] > maes[2] > maes[3]


def test_pad_to_envelope():
    img = PixelImage.from_array(np.ones((28, 28), dtype=np.uint8) * 7)
    padded = frqi.pad_to_envelope(img)
    assert padded.width == padded.height == 32
    arr = padded.as_array()
    assert np.all(arr[:28, :28] == 7)
    assert np.all(arr[28:, :] == 0) and np.all(arr[:, 28:] == 0)
    square = PixelImage.from_array(np.zeros((8, 8), dtype=np.uint8))
    assert frqi.pad_to_envelope(square) is square


@pytest.mark.parametrize("binary", [True, False])
def test_pgm_roundtrip(tmp_path, binary):
    rng = np.random.default_rng(2)
    img = PixelImage.from_array(rng.integers(0, 256, size=(8, 8), dtype=np.uint8))
    path = tmp_path / "img.pgm"
    frqi.write_pgm(img, path, binary=binary)
    back = frqi.read_pgm(path)
    assert np.array_equal(back.as_array(), img.as_array())


def test_pgm_rejects_garbage(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError):
        frqi.read_pgm(path)


def test_angles_csv(tmp_path):
    angles = AngleImage(1, np.array([0.0, 0.5, 1.0, 1.5]))
    path = tmp_path / "a.csv"
    frqi.write_angles_csv(angles, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "position,angle"
    assert lines[2] == "1,0.5"
