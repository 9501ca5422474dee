"""Loss, gradients, optimizers, and the training loop.

Three gradient modes:

* ``adjoint`` (default) -- exact analytic gradient by back-propagating a
  single effective observable through the circuit; O(gates) per sample, so
  it is the only mode that is fast enough for the desk-scale runs.
* ``parameter-shift`` -- exact shift-rule gradient of the feature vector
  (two-term for plain RY/RZ parameters, four-term for controlled-RY
  parameters, whose generator has a 0 eigenvalue), chained through the
  closed-form head/softmax derivative.
* ``finite-difference`` -- central differences of the full loss; the test
  oracle the other two are checked against.

All three agree to float precision; the choice only affects speed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import model as m
from .frqi import AngleImage
from .model import ModelConfig, ParamVector

GRADIENT_MODES = ("adjoint", "parameter-shift", "finite-difference")

PROB_CLAMP = 1e-12

# four-term shift rule for controlled rotations (frequencies 1/2 and 1)
_FT_C1 = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_FT_C2 = (math.sqrt(2) - 1) / (4 * math.sqrt(2))
_SHIFTS_TWO = ((math.pi / 2, 0.5), (-math.pi / 2, -0.5))
_SHIFTS_FOUR = (
    (math.pi / 2, _FT_C1),
    (-math.pi / 2, -_FT_C1),
    (3 * math.pi / 2, -_FT_C2),
    (-3 * math.pi / 2, _FT_C2),
)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    if not 0 <= label < probs.shape[-1]:
        raise ValueError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(float(probs[label]), PROB_CLAMP)))


@dataclass
class TrainConfig:
    optimizer: str = "adam"  # or "sgd"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    gradient_mode: str = "adjoint"
    fd_step: float = 1e-4
    shuffle: bool = True

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr > 0, batch_size >= 1, epochs >= 1 required")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, values, grad):
        return values - self.lr * grad


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, values, grad):
        if self.m is None:
            self.m = np.zeros_like(values)
            self.v = np.zeros_like(values)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return values - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return Sgd(cfg.lr)
    return Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)


def _as_batch(batch):
    """Accept [(AngleImage|vector, label), ...] -> (angles (B, 4**n), labels (B,))."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    angles = []
    labels = []
    for a, y in batch:
        angles.append(a.angles if isinstance(a, AngleImage) else np.asarray(a, dtype=np.float64))
        labels.append(int(y))
    return np.stack(angles), np.array(labels, dtype=np.int64)


def _head_chain(config, w, b, feats, labels):
    """Per-sample residuals and head gradients for mean cross-entropy.

    Returns (losses (B,), dL/dfeatures (B, F), grad_w, grad_b).  The clamp on
    predicted probabilities zeroes the gradient of clamped samples, matching
    the clamped loss.
    """
    bsz = feats.shape[0]
    probs = m.softmax(m.head_logits(feats, w, b))
    picked = probs[np.arange(bsz), labels]
    losses = -np.log(np.maximum(picked, PROB_CLAMP))
    resid = probs.copy()
    resid[np.arange(bsz), labels] -= 1.0
    resid[picked < PROB_CLAMP] = 0.0
    dfeat = resid @ w
    grad_w = resid.T @ feats / bsz
    grad_b = resid.mean(axis=0) if b is not None else None
    return losses, dfeat, grad_w, grad_b


def _pack_head_grad(config, grad, grad_w, grad_b):
    pqc, _ = m.count_parameters(config)
    fdim = config.feature_dim()
    c = config.num_classes
    grad[pqc : pqc + c * fdim] = grad_w.reshape(-1)
    if grad_b is not None:
        grad[pqc + c * fdim :] = grad_b


def _apply_generator(amps, nq, gate):
    """tmp = dU/dtheta U^dagger applied to the post-gate state.

    For RY-generated gates (controls select the active subspace):
    tmp[idx0] = -amps[idx1]/2, tmp[idx1] = amps[idx0]/2; for RZ:
    -i/2 on the 0 branch, +i/2 on the 1 branch.
    """
    from .qsim import _pair_indices

    idx0, idx1 = _pair_indices(nq, gate.target, gate.controls)
    tmp = np.zeros_like(amps)
    if gate.kind in ("ry", "cry"):
        tmp[..., idx0] = -0.5 * amps[..., idx1]
        tmp[..., idx1] = 0.5 * amps[..., idx0]
    elif gate.kind == "rz":
        tmp[..., idx0] = -0.5j * amps[..., idx0]
        tmp[..., idx1] = 0.5j * amps[..., idx1]
    else:
        raise ValueError(f"gate {gate.kind} has no parameter")
    return tmp


def _observable_diag(config, dfeat):
    """Diagonal of the effective observable sum_f (dL/df) * Feature_f.

    Both feature modes are diagonal in the computational basis, so the chain
    rule through the features reduces the whole PQC gradient to the gradient
    of a single expectation value per sample.
    """
    if config.head.feature_mode == "per-qubit-z":
        weights = dfeat @ m._z_signs(config.memory_qubits)  # -> (B, 2**mem)
    else:
        # basis-probs features carry a 2**m normalization; the observable
        # must carry the same factor for d<O>/dtheta to equal dL/dtheta
        weights = dfeat * (1 << config.memory_qubits)
    reps = 1 << config.frqi_qubits
    return np.repeat(weights, reps, axis=-1)  # memory bits are the high bits


def _loss_and_grad_adjoint(config, params, angles_arr, labels):
    gates, num_pqc, _ = m.build_program(config)
    pqc_vals, w, b = m.split_params(config, params)
    bsz = angles_arr.shape[0]
    nq = config.total_qubits

    psi = np.stack([m.lift_frqi_state(config, AngleImage(config.n, a)) for a in angles_arr])
    m.run_program(psi, config, gates, pqc_vals)
    feats = m.features_from_memory_probs(m.memory_basis_probs(psi, config), config)
    losses, dfeat, grad_w, grad_b = _head_chain(config, w, b, feats, labels)

    lam = _observable_diag(config, dfeat) * psi
    grad = np.zeros(params.values.shape)
    from . import qsim

    for g in reversed(gates):
        if g.param >= 0:
            tmp = _apply_generator(psi, nq, g)
            contrib = 2.0 * np.sum(np.conj(lam) * tmp, axis=-1).real
            grad[g.param] = contrib.mean()
        # uncompute
        if g.kind == "cnot":
            qsim.x_(psi, nq, g.target, g.controls)
            qsim.x_(lam, nq, g.target, g.controls)
        elif g.kind in ("ry", "cry"):
            qsim.ry_(psi, nq, g.target, -pqc_vals[g.param], g.controls)
            qsim.ry_(lam, nq, g.target, -pqc_vals[g.param], g.controls)
        else:
            qsim.rz_(psi, nq, g.target, -pqc_vals[g.param], g.controls)
            qsim.rz_(lam, nq, g.target, -pqc_vals[g.param], g.controls)
    _pack_head_grad(config, grad, grad_w, grad_b)
    return float(losses.mean()), grad


def _shift_plan(gates, num_pqc):
    """Rows of the batched shift evaluation: row 0 unshifted, then per-param
    shifted copies with their rule coefficients."""
    param_kind = {}
    for g in gates:
        if g.param >= 0:
            param_kind[g.param] = "four" if (g.kind == "cry" and g.controls) else "two"
    rows = [(-1, 0.0, 0.0)]
    for p in range(num_pqc):
        terms = _SHIFTS_FOUR if param_kind[p] == "four" else _SHIFTS_TWO
        for shift, coeff in terms:
            rows.append((p, shift, coeff))
    return rows


def _loss_and_grad_shift(config, params, angles_arr, labels):
    gates, num_pqc, _ = m.build_program(config)
    pqc_vals, w, b = m.split_params(config, params)
    bsz = angles_arr.shape[0]
    rows = _shift_plan(gates, num_pqc)
    angle_rows = np.tile(pqc_vals, (len(rows), 1))
    for r, (p, shift, _) in enumerate(rows):
        if p >= 0:
            angle_rows[r, p] += shift

    grad = np.zeros(params.values.shape)
    total_loss = 0.0
    grad_w_acc = None
    grad_b_acc = None
    for s in range(bsz):
        base = m.lift_frqi_state(config, AngleImage(config.n, angles_arr[s]))
        amps = np.tile(base, (len(rows), 1))
        m.run_program(amps, config, gates, pqc_vals, angle_rows=angle_rows)
        feats = m.features_from_memory_probs(m.memory_basis_probs(amps, config), config)
        losses, dfeat, grad_w, grad_b = _head_chain(
            config, w, b, feats[:1], labels[s : s + 1]
        )
        total_loss += float(losses[0])
        c_feat = dfeat[0]
        for r, (p, _, coeff) in enumerate(rows):
            if p >= 0:
                grad[p] += coeff * float(c_feat @ feats[r])
        grad_w_acc = grad_w if grad_w_acc is None else grad_w_acc + grad_w
        if grad_b is not None:
            grad_b_acc = grad_b if grad_b_acc is None else grad_b_acc + grad_b
    grad[:num_pqc] /= bsz
    _pack_head_grad(config, grad, grad_w_acc / bsz,
                    None if grad_b_acc is None else grad_b_acc / bsz)
    return total_loss / bsz, grad


def _batch_loss(config, params, angles_arr, labels):
    probs = m.forward_batch(config, params, angles_arr)
    picked = np.maximum(probs[np.arange(len(labels)), labels], PROB_CLAMP)
    return float(-np.log(picked).mean())


def _loss_and_grad_fd(config, params, angles_arr, labels, h):
    grad = np.zeros(params.values.shape)
    base = _batch_loss(config, params, angles_arr, labels)
    for k in range(params.values.size):
        up = params.copy()
        up.values[k] += h
        down = params.copy()
        down.values[k] -= h
        grad[k] = (_batch_loss(config, up, angles_arr, labels)
                   - _batch_loss(config, down, angles_arr, labels)) / (2 * h)
    return base, grad


def loss_and_gradient(config: ModelConfig, params: ParamVector, batch,
                      mode: str = "adjoint", fd_step: float = 1e-4):
    """Mean cross-entropy over the batch and its gradient w.r.t. all parameters."""
    angles_arr, labels = _as_batch(batch)
    if mode == "adjoint":
        return _loss_and_grad_adjoint(config, params, angles_arr, labels)
    if mode == "parameter-shift":
        return _loss_and_grad_shift(config, params, angles_arr, labels)
    if mode == "finite-difference":
        return _loss_and_grad_fd(config, params, angles_arr, labels, fd_step)
    raise ValueError(f"unknown gradient mode {mode!r}")


def gradient(config: ModelConfig, params: ParamVector, batch,
             mode: str = "parameter-shift", fd_step: float = 1e-4) -> np.ndarray:
    return loss_and_gradient(config, params, batch, mode=mode, fd_step=fd_step)[1]


# ---------------------------------------------------------------------------
# evaluation and the fit loop

@dataclass
class EvalResult:
    loss: float
    accuracy: float
    confusion: np.ndarray  # (classes, classes), rows = true label


def evaluate(config: ModelConfig, params: ParamVector, angles_arr, labels) -> EvalResult:
    """Argmax classification (ties resolve to the lower class index)."""
    angles_arr = np.asarray(angles_arr, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    probs = m.forward_batch(config, params, angles_arr)
    picked = np.maximum(probs[np.arange(len(labels)), labels], PROB_CLAMP)
    loss = float(-np.log(picked).mean())
    pred = probs.argmax(axis=1)
    conf = np.zeros((config.num_classes, config.num_classes), dtype=np.int64)
    np.add.at(conf, (labels, pred), 1)
    return EvalResult(loss=loss, accuracy=float(np.trace(conf) / conf.sum()), confusion=conf)


@dataclass
class RunMetrics:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    confusion: np.ndarray | None = None  # test-set matrix at the best epoch
    best_epoch: int = -1


class TrainingDiverged(RuntimeError):
    def __init__(self, message, metrics):
        super().__init__(message)
        self.metrics = metrics


@dataclass
class FitResult:
    best_params: ParamVector
    final_params: ParamVector
    metrics: RunMetrics


def fit(config: ModelConfig, train_angles, train_labels, test_angles, test_labels,
        tcfg: TrainConfig, progress=None) -> FitResult:
    """Deterministic minibatch training with checkpoint-best-on-test policy."""
    train_angles = np.asarray(train_angles, dtype=np.float64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    test_angles = np.asarray(test_angles, dtype=np.float64)
    test_labels = np.asarray(test_labels, dtype=np.int64)
    if len(train_angles) == 0 or len(test_angles) == 0:
        raise ValueError("both splits need at least one sample")

    params = m.init_params(config, tcfg.seed)
    opt = _make_optimizer(tcfg)
    rng = np.random.default_rng(tcfg.seed)
    metrics = RunMetrics()
    best_params = params.copy()
    best_acc = -1.0

    num = len(train_angles)
    for epoch in range(tcfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(num) if tcfg.shuffle else np.arange(num)
        for start in range(0, num, tcfg.batch_size):
            sel = order[start : start + tcfg.batch_size]
            batch = list(zip(train_angles[sel], train_labels[sel]))
            loss, grad = loss_and_gradient(
                config, params, batch, mode=tcfg.gradient_mode, fd_step=tcfg.fd_step
            )
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingDiverged(
                    f"non-finite loss/gradient at epoch {epoch}, step {start // tcfg.batch_size}",
                    metrics,
                )
            params = ParamVector(opt.step(params.values, grad), params.layout_version)

        tr = evaluate(config, params, train_angles, train_labels)
        te = evaluate(config, params, test_angles, test_labels)
        metrics.train_loss.append(tr.loss)
        metrics.train_acc.append(tr.accuracy)
        metrics.test_loss.append(te.loss)
        metrics.test_acc.append(te.accuracy)
        metrics.epoch_seconds.append(time.perf_counter() - t0)
        if te.accuracy > best_acc:
            best_acc = te.accuracy
            best_params = params.copy()
            metrics.best_epoch = epoch
            metrics.confusion = te.confusion
        if progress is not None:
            progress(epoch, tr, te)
    return FitResult(best_params=best_params, final_params=params, metrics=metrics)


# ---------------------------------------------------------------------------
# metrics files

def write_metrics_csv(metrics: RunMetrics, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,train_acc,test_loss,test_acc,seconds\n")
        for e in range(len(metrics.train_loss)):
            fh.write(
                f"{e},{metrics.train_loss[e]!r},{metrics.train_acc[e]!r},"
                f"{metrics.test_loss[e]!r},{metrics.test_acc[e]!r},"
                f"{metrics.epoch_seconds[e]:.3f}\n"
            )


def write_confusion_csv(confusion: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for row in confusion:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def metrics_to_dict(metrics: RunMetrics) -> dict:
    return {
        "train_loss": metrics.train_loss,
        "train_acc": metrics.train_acc,
        "test_loss": metrics.test_loss,
        "test_acc": metrics.test_acc,
        "epoch_seconds": metrics.epoch_seconds,
        "best_epoch": metrics.best_epoch,
        "confusion": None if metrics.confusion is None else metrics.confusion.tolist(),
    }
