import numpy as np
import pytest

from frqi_pairs import model, train
from frqi_pairs.frqi import AngleImage
from frqi_pairs.model import HeadConfig, ModelConfig
from frqi_pairs.train import TrainConfig


def small_cfg(**kw):
    defaults = dict(variant="frqi-pairs", memory_qubits=2, deep_layers=1, n=1,
                    num_classes=3, pairing="cross")
    defaults.update(kw)
    return ModelConfig(**defaults)


def random_batch(config, rng, size):
    dim = 1 << (2 * config.n)
    return [
        (AngleImage(config.n, rng.uniform(0, np.pi / 2, dim)),
         int(rng.integers(config.num_classes)))
        for _ in range(size)
    ]


def random_params(config, rng, head_scale=0.5):
    pqc, head = model.count_parameters(config)
    return model.ParamVector(
        np.concatenate([rng.uniform(-1.5, 1.5, pqc), rng.normal(0, head_scale, head)]))


def test_cross_entropy_examples():
    onehot = np.zeros(10)
    onehot[4] = 1.0
    assert train.cross_entropy(onehot, 4) == 0.0
    assert abs(train.cross_entropy(np.full(10, 0.1), 7) - np.log(10)) < 1e-12
    assert abs(train.cross_entropy(np.array([0.5, 0.5]), 0) - np.log(2)) < 1e-12
    assert train.cross_entropy(onehot, 0) <= -np.log(train.PROB_CLAMP) + 1e-9
    with pytest.raises(ValueError):
        train.cross_entropy(np.full(10, 0.1), 10)


def test_head_bias_gradient_closed_form():
    # zero weights everywhere: bias gradient is softmax(0) - onehot, batch mean
    c = small_cfg(head=HeadConfig("basis-probs", bias=True))
    params = model.ParamVector(np.zeros(model.num_parameters(c)))
    rng = np.random.default_rng(0)
    batch = random_batch(c, rng, 4)
    grad = train.gradient(c, params, batch, mode="adjoint")
    labels = np.array([y for _, y in batch])
    expected = np.full(c.num_classes, 1 / c.num_classes)
    expected = np.tile(expected, (len(batch), 1))
    expected[np.arange(len(batch)), labels] -= 1
    bias_grad = grad[-c.num_classes:]
    assert np.allclose(bias_grad, expected.mean(axis=0), atol=1e-12)


@pytest.mark.parametrize("mode", ["adjoint", "parameter-shift"])
def test_gradient_matches_finite_difference(mode):
    rng = np.random.default_rng(1)
    for trial in range(5):
        c = small_cfg(
            n=int(rng.integers(1, 3)),
            memory_qubits=int(rng.integers(1, 3)),
            head=HeadConfig(str(rng.choice(["basis-probs", "per-qubit-z"])),
                            bool(rng.integers(2))),
        )
        params = random_params(c, rng)
        batch = random_batch(c, rng, 1)
        g = train.gradient(c, params, batch, mode=mode)
        fd = train.gradient(c, params, batch, mode="finite-difference", fd_step=1e-4)
        big = np.abs(fd) >= 1e-3
        assert np.abs((g[big] - fd[big]) / fd[big]).max(initial=0) < 1e-4
        assert np.abs(g[~big] - fd[~big]).max(initial=0) < 1e-6


def test_adjoint_equals_parameter_shift_tightly():
    rng = np.random.default_rng(2)
    c = small_cfg(n=2, memory_qubits=2)
    params = random_params(c, rng)
    batch = random_batch(c, rng, 3)
    ga = train.gradient(c, params, batch, mode="adjoint")
    gs = train.gradient(c, params, batch, mode="parameter-shift")
    assert np.abs(ga - gs).max() < 1e-12


def test_duplicated_sample_batch_gradient():
    rng = np.random.default_rng(3)
    c = small_cfg()
    params = random_params(c, rng)
    sample = random_batch(c, rng, 1)
    g1 = train.gradient(c, params, sample, mode="adjoint")
    g4 = train.gradient(c, params, sample * 4, mode="adjoint")
    assert np.allclose(g1, g4, atol=1e-14)


def test_empty_batch_rejected():
    c = small_cfg()
    with pytest.raises(ValueError):
        train.gradient(c, model.init_params(c, 0), [])


def test_sgd_step_descends():
    rng = np.random.default_rng(4)
    c = small_cfg()
    failures = 0
    for trial in range(50):
        params = random_params(c, rng)
        batch = random_batch(c, rng, 1)
        loss0, grad = train.loss_and_gradient(c, params, batch, mode="adjoint")
        stepped = model.ParamVector(params.values - 1e-3 * grad)
        loss1, _ = train.loss_and_gradient(c, stepped, batch, mode="adjoint")
        if loss1 > loss0 + 1e-9:
            failures += 1
    assert failures == 0


def test_adam_matches_reference_update():
    opt = train.Adam(lr=0.1)
    vals = np.array([1.0, -2.0])
    grad = np.array([0.5, -0.25])
    out = opt.step(vals, grad)
    # first step: m_hat = grad, v_hat = grad^2 -> step ~ lr * sign(grad)
    expected = vals - 0.1 * grad / (np.abs(grad) + 1e-8)
    assert np.allclose(out, expected)


def make_toy():
    black = np.zeros(16)
    white = np.full(16, np.pi / 2)
    angles = np.stack([black, white] * 10)
    labels = np.array([0, 1] * 10)
    return angles, labels


def test_fit_separable_task():
    angles, labels = make_toy()
    c = ModelConfig(n=2, num_classes=2, pairing="triangular")
    tc = TrainConfig(epochs=20, batch_size=4, seed=0)
    result = train.fit(c, angles, labels, angles, labels, tc)
    assert max(result.metrics.test_acc) == 1.0


def test_fit_deterministic():
    angles, labels = make_toy()
    c = ModelConfig(n=2, num_classes=2, memory_qubits=2, pairing="triangular")
    tc = TrainConfig(epochs=3, batch_size=4, seed=7)
    r1 = train.fit(c, angles, labels, angles, labels, tc)
    r2 = train.fit(c, angles, labels, angles, labels, tc)
    assert r1.metrics.train_loss == r2.metrics.train_loss
    assert r1.metrics.test_acc == r2.metrics.test_acc
    assert np.array_equal(r1.final_params.values, r2.final_params.values)
    assert np.array_equal(r1.best_params.values, r2.best_params.values)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_fit_divergence_aborts():
    angles, labels = make_toy()
    c = ModelConfig(n=2, num_classes=2, memory_qubits=1, pairing="triangular")
    # an infinite step drives the rotation angles to inf/nan on the first
    # update; the next batch must then see a non-finite loss and abort
    tc = TrainConfig(epochs=3, batch_size=4, seed=0, lr=float("inf"))
    with pytest.raises(train.TrainingDiverged) as err:
        train.fit(c, angles, labels, angles, labels, tc)
    assert err.value.metrics is not None


def test_evaluate_confusion_consistency():
    rng = np.random.default_rng(5)
    c = small_cfg(num_classes=3)
    params = random_params(c, rng)
    angles = rng.uniform(0, np.pi / 2, size=(30, 4))
    labels = rng.integers(3, size=30)
    res = train.evaluate(c, params, angles, labels)
    assert res.confusion.sum() == 30
    assert np.array_equal(res.confusion.sum(axis=1), np.bincount(labels, minlength=3))
    assert res.accuracy == np.trace(res.confusion) / 30


def test_evaluate_tie_breaks_to_class_zero():
    c = small_cfg(num_classes=2)
    params = model.ParamVector(np.zeros(model.num_parameters(c)))  # uniform output
    angles = np.random.default_rng(6).uniform(0, 1, size=(10, 4))
    labels = np.array([0, 1] * 5)
    res = train.evaluate(c, params, angles, labels)
    assert res.accuracy == 0.5
    assert res.confusion[:, 0].sum() == 10  # everything predicted as class 0


def test_metrics_csv_format(tmp_path):
    m = train.RunMetrics(
        train_loss=[1.5, 1.0], train_acc=[0.5, 0.75],
        test_loss=[1.6, 1.1], test_acc=[0.5, 0.7],
        epoch_seconds=[0.1, 0.2], best_epoch=1,
        confusion=np.array([[3, 1], [0, 4]]),
    )
    path = tmp_path / "metrics.csv"
    train.write_metrics_csv(m, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,test_loss,test_acc,seconds"
    assert lines[1].startswith("0,1.5,0.5,1.6,0.5,")
    conf_path = tmp_path / "conf.csv"
    train.write_confusion_csv(m.confusion, conf_path)
    assert conf_path.read_text() == "3,1\n0,4\n"


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(gradient_mode="autodiff")
    with pytest.raises(ValueError):
        TrainConfig(optimizer="lbfgs")
