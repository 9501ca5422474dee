"""Command-line front door: encode / sample / train / eval / dataset cache.

Every command writes its outputs plus a ``manifest.json`` listing the
resolved configuration, seed, git revision, timestamps, and the produced
files.  On failure a machine-readable error JSON goes to stderr and the
exit code is nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import subprocess
import sys
import time

import numpy as np

from . import data, frqi, model, qsim, train

REFERENCE_PQC_TARGET = 636
REFERENCE_HEAD_TARGET = 80


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_manifest(out_dir, command, config: dict, seed, outputs, started: float):
    missing = [p for p in outputs if not os.path.exists(p)]
    if missing:
        raise RuntimeError(f"declared outputs missing: {missing}")
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "git_describe": _git_describe(),
        "started_unix": started,
        "finished_unix": time.time(),
        "outputs": [os.path.abspath(p) for p in outputs],
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return path


def _load_image(path, pad: bool) -> frqi.PixelImage:
    img = frqi.read_pgm(path)
    if img.width != img.height or (img.width & (img.width - 1)) != 0:
        if not pad:
            raise ValueError(
                f"{path} is {img.width}x{img.height}; pass --pad to zero-pad "
                "to the square power-of-two envelope"
            )
        img = frqi.pad_to_envelope(img)
    return img


def cmd_encode(args) -> int:
    started = time.time()
    os.makedirs(args.out_dir, exist_ok=True)
    img = _load_image(args.image, args.pad)
    angles = frqi.scale_to_angles(img)
    state = frqi.encode_direct(angles)
    retrieved = frqi.angles_to_image(frqi.retrieve_analytic(state, angles.n))

    amp_path = os.path.join(args.out_dir, "amplitudes.csv")
    pgm_path = os.path.join(args.out_dir, "retrieved.pgm")
    report_path = os.path.join(args.out_dir, "report.json")
    qsim.dump_amplitudes_csv(state, amp_path)
    frqi.write_pgm(retrieved, pgm_path)
    diff = np.abs(retrieved.intensities.astype(int) - img.intensities.astype(int))
    with open(report_path, "w") as fh:
        json.dump(
            {
                "image": os.path.abspath(args.image),
                "side": img.width,
                "side_exponent": angles.n,
                "qubits": frqi.qubit_budget(angles.n),
                "original": img.as_array().tolist(),
                "retrieved": retrieved.as_array().tolist(),
                "max_abs_intensity_error": int(diff.max()),
            },
            fh, indent=1,
        )
        fh.write("\n")
    outputs = [amp_path, pgm_path, report_path]
    cfg_echo = {k: v for k, v in vars(args).items() if k != "func"}
    _write_manifest(args.out_dir, "encode", cfg_echo, None, outputs, started)
    print(f"encoded {args.image}: {frqi.qubit_budget(angles.n)} qubits, "
          f"{state.amplitudes.size} amplitudes -> {args.out_dir}")
    return 0


def cmd_sample(args) -> int:
    started = time.time()
    os.makedirs(args.out_dir, exist_ok=True)
    img = _load_image(args.image, args.pad)
    angles = frqi.scale_to_angles(img)
    state = frqi.encode_direct(angles)
    counts = frqi.measure_all(state, angles.n, args.shots, args.seed)
    est = frqi.retrieve_from_shots(counts, angles.n)
    retrieved = frqi.angles_to_image(est)

    counts_path = os.path.join(args.out_dir, "counts.csv")
    pgm_path = os.path.join(args.out_dir, "retrieved_shots.pgm")
    report_path = os.path.join(args.out_dir, "report.json")
    qsim.write_shot_csv(counts, counts_path)
    frqi.write_pgm(retrieved, pgm_path)
    mae = float(np.abs(est.angles - angles.angles).mean())
    with open(report_path, "w") as fh:
        json.dump(
            {
                "image": os.path.abspath(args.image),
                "shots": args.shots,
                "seed": args.seed,
                "mean_abs_angle_error": mae,
                "unsampled_positions": int((est.support == 0).sum()),
            },
            fh, indent=1,
        )
        fh.write("\n")
    outputs = [counts_path, pgm_path, report_path]
    cfg_echo = {k: v for k, v in vars(args).items() if k != "func"}
    _write_manifest(args.out_dir, "sample", cfg_echo, args.seed, outputs, started)
    print(f"sampled {args.shots} shots (seed {args.seed}): mean abs angle error {mae:.4f}")
    return 0


def _model_config(args) -> model.ModelConfig:
    return model.ModelConfig(
        variant=args.variant,
        memory_qubits=args.memory_qubits,
        deep_layers=args.layers,
        n=args.n,
        num_classes=args.classes,
        pairing=args.pairing,
        repetitions=args.repetitions,
        head=model.HeadConfig(feature_mode=args.head, bias=args.bias),
    )


def _load_angle_splits(args):
    """-> (train AngleDataset, test AngleDataset) from caches or an MNIST dir."""
    if args.train_cache and args.test_cache:
        return data.load_cache(args.train_cache), data.load_cache(args.test_cache)
    mnist_dir = args.mnist_dir or os.environ.get("MNIST_DIR")
    if not mnist_dir:
        raise ValueError("no dataset: pass --mnist-dir / MNIST_DIR or --train-cache/--test-cache")
    side = 1 << args.n
    out = []
    for split in ("train", "test"):
        ds = data.load_mnist(mnist_dir, split)
        if args.classes < 10:
            ds = data.filter_classes(ds, range(args.classes))
        per_class = args.subset_per_class if split == "train" else args.test_per_class
        if per_class:
            ds = data.subset(ds, per_class, args.seed)
        ds = data.resize_dataset(ds, side, args.resize_filter)
        out.append(data.to_angles(ds))
    return tuple(out)


def _print_parameter_accounting(config: model.ModelConfig):
    pqc, head = model.count_parameters(config)
    cells = len(model.build_cell_schedule(config))
    print(f"cells: {cells}")
    print(f"pqc params: {pqc} (reference target: {REFERENCE_PQC_TARGET})")
    print(f"head params: {head} (reference target: {REFERENCE_HEAD_TARGET})")
    print(f"total params: {pqc + head} "
          f"(reference target: {REFERENCE_PQC_TARGET + REFERENCE_HEAD_TARGET})")


def cmd_train(args) -> int:
    started = time.time()
    os.makedirs(args.out_dir, exist_ok=True)
    config = _model_config(args)
    _print_parameter_accounting(config)
    train_set, test_set = _load_angle_splits(args)
    if train_set.n != config.n or test_set.n != config.n:
        raise ValueError(
            f"dataset side exponent {train_set.n} does not match model n={config.n}"
        )
    tcfg = train.TrainConfig(
        optimizer=args.optimizer, lr=args.lr, batch_size=args.batch_size,
        epochs=args.epochs, seed=args.seed, gradient_mode=args.gradient_mode,
        shuffle=not args.no_shuffle,
    )

    metrics_path = os.path.join(args.out_dir, "metrics.csv")
    confusion_path = os.path.join(args.out_dir, "confusion.csv")
    best_path = os.path.join(args.out_dir, "checkpoint_best.json")
    final_path = os.path.join(args.out_dir, "checkpoint_final.json")
    report_path = os.path.join(args.out_dir, "run_report.json")

    def progress(epoch, tr, te):
        print(f"epoch {epoch}: train loss {tr.loss:.4f} acc {tr.accuracy:.3f} | "
              f"test loss {te.loss:.4f} acc {te.accuracy:.3f}", flush=True)
        # flush rolling checkpoints so long runs can be resumed/inspected

    try:
        result = train.fit(
            config, train_set.angles, train_set.labels,
            test_set.angles, test_set.labels, tcfg, progress=progress,
        )
    except train.TrainingDiverged as exc:
        train.write_metrics_csv(exc.metrics, metrics_path)
        raise
    train.write_metrics_csv(result.metrics, metrics_path)
    train.write_confusion_csv(result.metrics.confusion, confusion_path)
    model.save_checkpoint(best_path, config, result.best_params,
                          extra={"best_epoch": result.metrics.best_epoch})
    model.save_checkpoint(final_path, config, result.final_params)
    with open(report_path, "w") as fh:
        json.dump(
            {
                "model_config": model._config_to_dict(config),
                "train_config": dataclasses.asdict(tcfg),
                "seed": args.seed,
                "train_samples": len(train_set),
                "test_samples": len(test_set),
                "metrics": train.metrics_to_dict(result.metrics),
            },
            fh, indent=1,
        )
        fh.write("\n")
    outputs = [metrics_path, confusion_path, best_path, final_path, report_path]
    cfg_echo = {k: v for k, v in vars(args).items() if k != "func"}
    _write_manifest(args.out_dir, "train", cfg_echo, args.seed, outputs, started)
    best = result.metrics.best_epoch
    print(f"best epoch {best}: test accuracy {result.metrics.test_acc[best]:.3f}")
    return 0


def cmd_eval(args) -> int:
    started = time.time()
    os.makedirs(args.out_dir, exist_ok=True)
    config, params = model.load_checkpoint(args.checkpoint)
    # reuse the dataset plumbing; fields the parser did not define fall back
    args.n = config.n
    args.classes = config.num_classes
    train_set, test_set = _load_angle_splits(args)
    dataset = train_set if args.split == "train" else test_set
    result = train.evaluate(config, params, dataset.angles, dataset.labels)
    confusion_path = os.path.join(args.out_dir, "confusion.csv")
    train.write_confusion_csv(result.confusion, confusion_path)
    cfg_echo = {k: v for k, v in vars(args).items() if k != "func"}
    _write_manifest(args.out_dir, "eval", cfg_echo, args.seed, [confusion_path], started)
    print(f"{args.split} loss {result.loss:.4f} accuracy {result.accuracy:.4f}")
    return 0


def cmd_dataset_cache(args) -> int:
    started = time.time()
    mnist_dir = args.mnist_dir or os.environ.get("MNIST_DIR")
    if not mnist_dir:
        raise ValueError("pass --mnist-dir or set MNIST_DIR")
    ds = data.load_mnist(mnist_dir, args.split)
    ds = data.resize_dataset(ds, args.side, args.resize_filter)
    angle_ds = data.to_angles(ds)
    data.save_cache(angle_ds, args.out)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    _write_manifest(out_dir, "dataset cache",
                    {k: v for k, v in vars(args).items() if k != "func"},
                    None, [args.out], started)
    print(f"cached {len(angle_ds)} samples ({args.side}x{args.side}) -> {args.out}")
    return 0


def _positive_int(value):
    ivalue = int(value)
    if ivalue < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return ivalue


def _add_dataset_flags(p):
    p.add_argument("--mnist-dir", default=None, help="directory with IDX files (or MNIST_DIR)")
    p.add_argument("--train-cache", default=None, help="preprocessed train cache (FQP1)")
    p.add_argument("--test-cache", default=None, help="preprocessed test cache (FQP1)")
    p.add_argument("--subset-per-class", type=_positive_int, default=None)
    p.add_argument("--test-per-class", type=_positive_int, default=None)
    p.add_argument("--resize-filter", choices=data.RESIZE_FILTERS, default="bilinear")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frqi-pairs",
        description="FRQI image encoding and QRNN digit classification (simulated)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a PGM image and dump the analytic round trip")
    p.add_argument("image")
    p.add_argument("--pad", action="store_true", help="zero-pad to the 2^n square envelope")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("sample", help="measure an encoded image and reconstruct from shots")
    p.add_argument("image")
    p.add_argument("--shots", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pad", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="train a QRNN classifier (defaults: reference config)")
    p.add_argument("--variant", choices=model.VARIANTS, default="frqi-pairs")
    p.add_argument("--pairing", choices=model.PAIRINGS, default="triangular",
                   help="triangular gives the six-cell reference setup at n=3")
    p.add_argument("--memory-qubits", type=_positive_int, default=4)
    p.add_argument("--layers", type=_positive_int, default=1)
    p.add_argument("--repetitions", type=_positive_int, default=2)
    p.add_argument("--n", type=_positive_int, default=3, help="image side exponent (side 2^n)")
    p.add_argument("--classes", type=int, choices=range(2, 11), default=10)
    p.add_argument("--head", choices=model.FEATURE_MODES, default="basis-probs")
    p.add_argument("--bias", action="store_true")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=_positive_int, default=32)
    p.add_argument("--epochs", type=_positive_int, default=30)
    p.add_argument("--gradient-mode", choices=train.GRADIENT_MODES, default="adjoint")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="cap on intra-run parallelism (runs are single-threaded today)")
    p.add_argument("--out-dir", required=True)
    _add_dataset_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_dataset_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dataset", help="dataset utilities")
    dsub = p.add_subparsers(dest="dataset_command", required=True)
    pc = dsub.add_parser("cache", help="preprocess a split into the FQP1 cache format")
    pc.add_argument("--mnist-dir", default=None)
    pc.add_argument("--split", choices=("train", "test"), default="train")
    pc.add_argument("--side", type=int, choices=(8, 16, 32), default=8)
    pc.add_argument("--resize-filter", choices=data.RESIZE_FILTERS, default="bilinear")
    pc.add_argument("--out", required=True)
    pc.set_defaults(func=cmd_dataset_cache)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (train.TrainingDiverged, model.CheckpointError, data.MnistFormatError,
            FileNotFoundError, ValueError, RuntimeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
