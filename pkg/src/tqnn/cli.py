"""Command-line entry point: ``tqnn {train,eval,predict,gradcheck,bench}``.

Settings resolve as command-line flag > ``--config`` JSON file > built-in
default.  The resolved settings are written to ``<out-dir>/config.json``
and echoed, together with the verbatim argv, into ``summary.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import CheckpointError, build_ansatz, evolve, init_weights, load_checkpoint
from .losses import GradEngine, LossKind, batch_loss_grad
from .mnist import IdxFormatError, RawDataset, filter_classes, load_split, parse_idx_images, prepare
from .statevector import apply_1q
from .trainer import NonFiniteLossError, TrainConfig, convergence_epoch, evaluate, predict, train

logger = logging.getLogger("tqnn")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NONFINITE = 3

GRADCHECK_THRESHOLD = 1e-5
GRADCHECK_FLOOR = 1e-3

DEFAULTS = {
    "qubits": None,  # derived from --pad / --downscale
    "layers": 6,
    "dt": 1.0,
    "lr": 0.03,
    "lr_decay": 0.99,
    "batch": 10,
    "epochs": 120,
    "seed": 0,
    "loss": "probmse",
    "grad": "shift",
    "classes": "0,1,2,3,4,5,6,7,8,9",
    "limit": None,
    "test_limit": None,
    "downscale": 1,
    "pad": 32,
    "data_dir": None,
    "out_dir": None,
    "threads": 1,
    "checkpoint": None,
    "split": "test",
    "input": None,
    "count": None,
    "instances": 5,
    "samples": 100,
}


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of settings (keys as flag names, '-' -> '_')")
    p.add_argument("--qubits", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data-dir", dest="data_dir", help="directory holding MNIST IDX files")
    p.add_argument("--classes", help="comma-separated digits, e.g. 0,1")
    p.add_argument("--limit", type=int, help="max training samples per class")
    p.add_argument("--test-limit", dest="test_limit", type=int, help="max test samples per class")
    p.add_argument("--downscale", type=int, help="block-mean pooling factor after padding")
    p.add_argument("--pad", type=int, help="pad images to PAD x PAD (default 32)")


def _add_training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", dest="lr_decay", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--loss", choices=[k.value for k in LossKind])
    p.add_argument("--grad", choices=[e.value for e in GradEngine])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tqnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the ansatz on MNIST IDX data")
    _add_common(p)
    _add_data(p)
    _add_training(p)
    p.add_argument("--checkpoint", help="initial weights (optional)")

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a split")
    _add_common(p)
    _add_data(p)
    p.add_argument("--checkpoint")
    p.add_argument("--split", choices=["train", "test"])

    p = sub.add_parser("predict", help="per-image class and readout distribution")
    _add_common(p)
    _add_data(p)
    p.add_argument("--checkpoint")
    p.add_argument("--input", help="IDX image file or .npy stack (default: data-dir test split)")
    p.add_argument("--count", type=int, help="only the first COUNT images")

    p = sub.add_parser("gradcheck", help="cross-check the gradient engines")
    _add_common(p)
    p.add_argument("--instances", type=int, help="number of random instances R")
    p.add_argument("--corrupt-analytic", dest="corrupt_analytic", action="store_true",
                   help=argparse.SUPPRESS)

    p = sub.add_parser("bench", help="simulator and training throughput")
    _add_common(p)
    _add_training(p)
    p.add_argument("--samples", type=int, help="synthetic samples per timed epoch")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if args.command == "gradcheck":
        settings.update(qubits=3, layers=2)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            file_settings = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from exc
        unknown = set(file_settings) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"{path}: unknown settings {sorted(unknown)}")
        settings.update(file_settings)
    for key, value in vars(args).items():
        if key in DEFAULTS and value is not None:
            settings[key] = value
    return settings


def _classes(settings) -> list:
    try:
        classes = sorted({int(c) for c in str(settings["classes"]).split(",") if c.strip()})
    except ValueError as exc:
        raise UsageError(f"bad --classes {settings['classes']!r}") from exc
    if not classes or any(not 0 <= c <= 9 for c in classes):
        raise UsageError(f"--classes must be digits 0-9, got {settings['classes']!r}")
    return classes


def _input_qubits(settings) -> int:
    pad, factor = settings["pad"], settings["downscale"]
    if pad < 1 or factor < 1 or pad % factor:
        raise UsageError(f"--downscale {factor} must divide --pad {pad}")
    side = pad // factor
    n = int(round(math.log2(side * side))) if side > 0 else 0
    if side * side != 1 << n:
        raise UsageError(f"{side}x{side} images do not fill a power-of-two register")
    if settings["qubits"] is not None and settings["qubits"] != n:
        raise UsageError(f"--qubits {settings['qubits']} does not match {side}x{side} inputs ({n} qubits)")
    return n


def _load(settings, split: str, limit) -> tuple:
    data_dir = settings["data_dir"]
    if data_dir is None:
        raise UsageError("--data-dir is required")
    if not Path(data_dir).is_dir():
        raise UsageError(f"data directory not found: {data_dir}")
    try:
        raw = load_split(data_dir, split)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    raw = filter_classes(raw, _classes(settings), limit)
    if len(raw) == 0:
        raise UsageError(f"no {split} samples left after class/limit filtering")
    return prepare(raw, settings["pad"], settings["downscale"])


def _checkpoint(settings, num_qubits=None):
    if settings["checkpoint"] is None:
        raise UsageError("--checkpoint is required")
    path = Path(settings["checkpoint"])
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    ck = load_checkpoint(path)
    for key, have in (("qubits", ck.spec.num_qubits), ("layers", ck.spec.num_layers)):
        if settings.get(key) is not None and settings[key] != have and key in settings["_explicit"]:
            raise UsageError(f"checkpoint has {key}={have} but --{key} {settings[key]} was given")
    if num_qubits is not None and ck.spec.num_qubits != num_qubits:
        raise UsageError(f"checkpoint is for {ck.spec.num_qubits} qubits, data needs {num_qubits}")
    return ck


def _out_dir(settings):
    if settings["out_dir"] is None:
        return None
    out = Path(settings["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _public(settings) -> dict:
    return {k: v for k, v in settings.items() if not k.startswith("_")}


# -- commands -------------------------------------------------------------------------


def cmd_train(settings, argv) -> int:
    num_qubits = _input_qubits(settings)
    config = TrainConfig(learning_rate=settings["lr"], lr_decay=settings["lr_decay"],
                         batch_size=settings["batch"], epochs=settings["epochs"],
                         seed=settings["seed"], loss_kind=settings["loss"],
                         grad_engine=settings["grad"], dt=settings["dt"],
                         threads=settings["threads"])
    train_set = _load(settings, "train", settings["limit"])
    test_set = _load(settings, "test", settings["test_limit"])
    spec = build_ansatz(num_qubits, settings["layers"], settings["dt"])
    weights = None
    if settings["checkpoint"] is not None:
        ck = _checkpoint(settings, num_qubits)
        if ck.spec.num_layers != spec.num_layers:
            raise UsageError(f"checkpoint has {ck.spec.num_layers} layers, run uses {spec.num_layers}")
        weights = ck.weights
    if settings["out_dir"] is None:
        raise UsageError("--out-dir is required for train")
    out = _out_dir(settings)
    _write_json(out / "config.json", _public(settings))

    t0 = time.perf_counter()
    summary = {"argv": list(argv), "manifest": _public(settings), "config": config.as_dict(),
               "seed": config.seed, "num_qubits": num_qubits, "num_layers": spec.num_layers,
               "num_params": spec.num_params, "train_size": int(len(train_set[1])),
               "test_size": int(len(test_set[1])), "version": __version__}
    try:
        result = train(spec, train_set, config, test_set, weights=weights, out_dir=out,
                       on_epoch=lambda m: print(
                           f"epoch {m.epoch:4d}  loss {m.mean_loss:.5f}  train {m.train_accuracy:.4f}"
                           f"  test {m.test_accuracy:.4f}  lr {m.lr:.5f}  {m.wall_time:.1f}s",
                           flush=True))
    except NonFiniteLossError as exc:
        summary.update(status="nonfinite", error=str(exc))
        _write_json(out / "summary.json", summary)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE

    best = result.history[result.best_epoch] if result.history else None
    summary.update(
        status="ok",
        wall_time_s=time.perf_counter() - t0,
        epochs_run=len(result.history),
        final_train_accuracy=result.final.train_accuracy if result.history else None,
        final_test_accuracy=result.final.test_accuracy if result.history else None,
        best_epoch=result.best_epoch,
        best_test_accuracy=best.test_accuracy if best else None,
        best_train_accuracy=best.train_accuracy if best else None,
        convergence_epoch=convergence_epoch(result.history),
    )
    _write_json(out / "summary.json", summary)
    print(f"done: final train {summary['final_train_accuracy']}, test {summary['final_test_accuracy']};"
          f" best test {summary['best_test_accuracy']} at epoch {result.best_epoch}")
    return EXIT_OK


def cmd_eval(settings, argv) -> int:
    num_qubits = _input_qubits(settings)
    ck = _checkpoint(settings, num_qubits)
    limit = settings["limit"] if settings["split"] == "train" else settings["test_limit"]
    states, labels = _load(settings, settings["split"], limit)
    acc = evaluate(ck.spec, ck.weights, states, labels)
    print(f"{settings['split']} accuracy {acc:.6f} ({int(round(acc * len(labels)))}/{len(labels)})")
    out = _out_dir(settings)
    if out is not None:
        _write_json(out / f"eval_{settings['split']}.json",
                    {"argv": list(argv), "manifest": _public(settings), "accuracy": acc,
                     "samples": int(len(labels))})
    return EXIT_OK


def _read_images(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        images = np.load(path)
        if images.ndim == 2:
            images = images[None]
        return np.asarray(images, dtype=np.float64)
    return parse_idx_images(path.read_bytes())


def cmd_predict(settings, argv) -> int:
    num_qubits = _input_qubits(settings)
    ck = _checkpoint(settings, num_qubits)
    if settings["input"] is not None:
        path = Path(settings["input"])
        if not path.is_file():
            raise UsageError(f"input not found: {path}")
        images = _read_images(path)
        if settings["count"] is not None:
            images = images[:settings["count"]]
        states, _ = prepare(RawDataset(images, np.zeros(len(images), dtype=int)),
                            settings["pad"], settings["downscale"])
    else:
        states, _ = _load(settings, "test", settings["test_limit"])
        if settings["count"] is not None:
            states = states[:settings["count"]]
    classes, dists = predict(ck.spec, ck.weights, states)
    lines = [f"{i}\t{c}\t" + " ".join(f"{p:.6f}" for p in d)
             for i, (c, d) in enumerate(zip(classes, dists))]
    print("\n".join(lines))
    out = _out_dir(settings)
    if out is not None:
        (out / "predictions.tsv").write_text("index\tclass\tdistribution\n" + "\n".join(lines) + "\n")
    return EXIT_OK


def _random_state(rng, dim):
    a = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return a / np.linalg.norm(a)


def gradcheck(num_qubits: int, num_layers: int, dt: float, instances: int, seed: int,
              corrupt_analytic: bool = False) -> dict:
    """Max relative disagreement between every engine and the analytic gradient.

    Relative error is ``|a - b| / max(|a|, |b|, 1e-3)``.  The fidelity loss
    uses a random target state; ``probmse`` is included when the register has
    at least 10 basis states.  Returns a report with the worst
    ``(instance, loss, engine, k)``.
    """
    if instances < 1:
        raise UsageError("--instances must be >= 1")
    rng = np.random.default_rng(seed)
    spec = build_ansatz(num_qubits, num_layers, dt)
    dim = 1 << num_qubits
    worst = {"error": 0.0}
    kinds = [LossKind.FIDELITY] + ([LossKind.PROB_MSE] if dim >= 10 else [])
    for r in range(instances):
        w = rng.uniform(-math.pi, math.pi, spec.num_params)
        psi = _random_state(rng, dim)[None]
        target = _random_state(rng, dim)[None]
        label = np.array([rng.integers(0, 10)])
        for kind in kinds:
            kw = dict(kind=kind, targets=target if kind is LossKind.FIDELITY else None)
            ref = batch_loss_grad(spec, w, psi, label, engine=GradEngine.ANALYTIC, **kw)[1][0]
            if corrupt_analytic:
                ref = -ref
            for engine in (GradEngine.PARAM_SHIFT, GradEngine.FINITE_DIFF, GradEngine.ADJOINT):
                g = batch_loss_grad(spec, w, psi, label, engine=engine, **kw)[1][0]
                err = np.abs(g - ref) / np.maximum(np.maximum(np.abs(g), np.abs(ref)), GRADCHECK_FLOOR)
                k = int(np.argmax(err))
                if err[k] > worst["error"]:
                    worst = {"error": float(err[k]), "instance": r, "loss": kind.value,
                             "engine": engine.value, "k": k}
    return {"max_relative_error": worst["error"], "worst": worst, "instances": instances,
            "num_qubits": num_qubits, "num_layers": num_layers, "num_params": spec.num_params,
            "threshold": GRADCHECK_THRESHOLD, "passed": worst["error"] < GRADCHECK_THRESHOLD}


def cmd_gradcheck(settings, argv) -> int:
    report = gradcheck(settings["qubits"], settings["layers"], settings["dt"],
                       settings["instances"], settings["seed"], settings["_corrupt_analytic"])
    print(f"gradcheck {report['num_qubits']} qubits x {report['num_layers']} layers, "
          f"{report['instances']} instances: max relative error {report['max_relative_error']:.3e}")
    out = _out_dir(settings)
    if out is not None:
        _write_json(out / "gradcheck.json", {"argv": list(argv), **report})
    if not report["passed"]:
        w = report["worst"]
        print(f"FAIL: worst instance {w['instance']} parameter k={w['k']} "
              f"({w['loss']} loss, {w['engine']} vs analytic)", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print("PASS")
    return EXIT_OK


def cmd_bench(settings, argv) -> int:
    n = settings["qubits"] or 10
    rng = np.random.default_rng(settings["seed"])
    amps = _random_state(rng, 1 << n)[None].repeat(8, axis=0)
    u = np.array([[0.6, -0.8j], [-0.8j, 0.6]])
    reps = max(1, (1 << 22) // amps.size)
    t0 = time.perf_counter()
    for i in range(reps):
        apply_1q(amps, n, i % n, u)
    gate_time = time.perf_counter() - t0
    amps_per_s = reps * amps.size / gate_time

    spec = build_ansatz(n, settings["layers"], settings["dt"])
    w = init_weights(spec, rng)
    samples = settings["samples"]
    states = np.stack([_random_state(rng, 1 << n) for _ in range(samples)])
    labels = rng.integers(0, 10, samples)
    t0 = time.perf_counter()
    evolve(spec, w, states)
    fwd = (time.perf_counter() - t0) / samples
    t0 = time.perf_counter()
    for start in range(0, samples, settings["batch"]):
        batch_loss_grad(spec, w, states[start:start + settings["batch"]], labels[start:start + settings["batch"]],
                        kind=settings["loss"], engine=settings["grad"])
    epoch = time.perf_counter() - t0
    report = {"num_qubits": n, "num_layers": spec.num_layers, "gate_amplitudes_per_s": amps_per_s,
              "forward_s_per_sample": fwd, "samples": samples, "grad_engine": settings["grad"],
              "seconds_per_epoch": epoch, "seconds_per_sample_gradient": epoch / samples}
    print(f"gate application : {amps_per_s:.3e} amplitudes/s ({n} qubits)")
    print(f"forward          : {fwd * 1e3:.3f} ms/sample ({spec.num_layers} layers)")
    print(f"training epoch   : {epoch:.3f} s for {samples} samples ({settings['grad']} gradients)")
    out = _out_dir(settings)
    if out is not None:
        _write_json(out / "bench.json", {"argv": list(argv), **report})
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "gradcheck": cmd_gradcheck, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve(args)
        settings["_explicit"] = {k for k, v in vars(args).items() if v is not None}
        settings["_corrupt_analytic"] = getattr(args, "corrupt_analytic", False)
        return COMMANDS[args.command](settings, argv)
    except (UsageError, CheckpointError, IdxFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
