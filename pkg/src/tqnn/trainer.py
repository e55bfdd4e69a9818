"""Mini-batch gradient descent for the rotation ansatz."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .circuit import CircuitSpec, evolve, init_weights, save_checkpoint
from .encoder import NUM_CLASSES, readout_distribution
from .losses import GradEngine, LossKind, batch_loss_grad

logger = logging.getLogger(__name__)

METRICS_FIELDS = ("epoch", "mean_loss", "train_acc", "test_acc", "lr", "wall_time_s")
EVAL_CHUNK = 1024


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch: int, batch: int, samples):
        self.epoch, self.batch, self.samples = epoch, batch, list(samples)
        super().__init__(
            f"non-finite loss/gradient in epoch {epoch}, batch {batch} (dataset rows {self.samples})"
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.03
    lr_decay: float = 0.99
    batch_size: int = 10
    epochs: int = 120
    seed: int = 0
    loss_kind: LossKind = LossKind.PROB_MSE
    grad_engine: GradEngine = GradEngine.PARAM_SHIFT
    dt: float = 1.0
    threads: int = 1

    def __post_init__(self):
        self.loss_kind = LossKind(self.loss_kind)
        self.grad_engine = GradEngine(self.grad_engine)
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.lr_decay <= 1:
            raise ValueError(f"lr_decay must be in (0, 1], got {self.lr_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

    def lr_at(self, epoch: int) -> float:
        """Learning rate for 0-based ``epoch``."""
        return self.learning_rate * self.lr_decay ** epoch

    def as_dict(self) -> dict:
        d = asdict(self)
        d["loss_kind"] = self.loss_kind.value
        d["grad_engine"] = self.grad_engine.value
        return d


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    train_accuracy: float
    test_accuracy: Optional[float]
    lr: float
    wall_time: float

    def row(self) -> list:
        test = "" if self.test_accuracy is None else repr(self.test_accuracy)
        return [self.epoch, repr(self.mean_loss), repr(self.train_accuracy), test,
                repr(self.lr), f"{self.wall_time:.3f}"]


@dataclass
class TrainResult:
    weights: np.ndarray
    best_weights: np.ndarray
    best_epoch: int
    history: list = field(default_factory=list)

    @property
    def final(self) -> EpochMetrics:
        return self.history[-1]


def sgd_step(w, g, eta: float) -> np.ndarray:
    w, g = np.asarray(w, dtype=np.float64), np.asarray(g, dtype=np.float64)
    if w.shape != g.shape:
        raise ValueError(f"weights {w.shape} and gradient {g.shape} differ in shape")
    if not eta > 0:
        raise ValueError(f"learning rate must be positive, got {eta}")
    return w - eta * g


def predict(spec: CircuitSpec, w, states) -> tuple:
    """Return ``(classes, distributions)`` for a stack of encoded inputs.

    Ties in the readout go to the lowest class index (``np.argmax``).
    """
    states = np.asarray(states, dtype=np.complex128)
    w = np.asarray(w, dtype=np.float64)
    dists = np.empty((len(states), NUM_CLASSES))
    for start in range(0, len(states), EVAL_CHUNK):
        phi = evolve(spec, w, states[start:start + EVAL_CHUNK])
        dists[start:start + EVAL_CHUNK] = readout_distribution(phi, NUM_CLASSES)
    return np.argmax(dists, axis=1), dists


def evaluate(spec: CircuitSpec, w, states, labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    classes, _ = predict(spec, w, states)
    return float(np.mean(classes == labels))


def batch_gradient(spec: CircuitSpec, w, states, labels, config: TrainConfig,
                   pool: Optional[ThreadPoolExecutor] = None) -> tuple:
    """Per-sample losses and the batch-mean gradient."""
    kw = dict(kind=config.loss_kind, engine=config.grad_engine)
    if pool is None or len(states) < 2:
        losses, grads = batch_loss_grad(spec, w, states, labels, **kw)
    else:
        chunks = np.array_split(np.arange(len(states)), min(config.threads, len(states)))
        parts = list(pool.map(lambda idx: batch_loss_grad(spec, w, states[idx], labels[idx], **kw),
                              chunks))
        losses = np.concatenate([p[0] for p in parts])
        grads = np.concatenate([p[1] for p in parts])
    return losses, grads.mean(axis=0)


def convergence_epoch(history, tol: float = 0.005) -> Optional[int]:
    """First epoch whose test accuracy is within ``tol`` of the run's best."""
    accs = [m.test_accuracy for m in history if m.test_accuracy is not None]
    if not accs:
        return None
    best = max(accs)
    for m in history:
        if m.test_accuracy is not None and m.test_accuracy >= best - tol:
            return m.epoch
    return None


def train(spec: CircuitSpec, train_set, config: TrainConfig, test_set=None,
          weights=None, out_dir=None,
          on_epoch: Optional[Callable[[EpochMetrics], None]] = None) -> TrainResult:
    """Fit the circuit weights with mini-batch gradient descent.

    Args:
        spec: circuit to train; its ``dt`` is used as-is.
        train_set: ``(states, labels)`` arrays of encoded inputs.
        config: hyperparameters.  The learning rate for epoch ``e`` is
            ``learning_rate * lr_decay**e``; rows are reshuffled every epoch
            with a generator seeded from ``config.seed``.
        test_set: optional ``(states, labels)`` evaluated after every epoch.
        weights: initial weights; drawn uniformly from [-0.1, 0.1] if omitted.
        out_dir: if given, ``metrics.csv``, ``checkpoint_best.txt`` and
            ``checkpoint_final.txt`` are written there.
        on_epoch: optional callback receiving each :class:`EpochMetrics`.

    Raises:
        NonFiniteLossError: a batch produced a NaN/inf loss or gradient.
    """
    states, labels = (np.asarray(a) for a in train_set)
    if len(labels) == 0:
        raise ValueError("training set is empty")
    if states.shape[1] != 1 << spec.num_qubits:
        raise ValueError(f"inputs have dimension {states.shape[1]}, circuit expects {1 << spec.num_qubits}")
    rng = np.random.default_rng(config.seed)
    w = init_weights(spec, rng) if weights is None else np.array(weights, dtype=np.float64)

    out = Path(out_dir) if out_dir is not None else None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_file = open(out / "metrics.csv", "w", newline="")
        writer = csv.writer(metrics_file)
        writer.writerow(METRICS_FIELDS)

    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    history: list[EpochMetrics] = []
    best_w, best_epoch, best_acc = w.copy(), -1, -math.inf
    try:
        for epoch in range(config.epochs):
            t0 = time.perf_counter()
            eta = config.lr_at(epoch)
            order = rng.permutation(len(labels))
            loss_sum = 0.0
            for b, start in enumerate(range(0, len(order), config.batch_size)):
                idx = order[start:start + config.batch_size]
                losses, grad = batch_gradient(spec, w, states[idx], labels[idx], config, pool)
                if not (np.all(np.isfinite(losses)) and np.all(np.isfinite(grad))):
                    raise NonFiniteLossError(epoch, b, idx)
                loss_sum += float(losses.sum())
                w = sgd_step(w, grad, eta)

            train_acc = evaluate(spec, w, states, labels)
            test_acc = evaluate(spec, w, *test_set) if test_set is not None else None
            m = EpochMetrics(epoch, loss_sum / len(labels), train_acc, test_acc, eta,
                             time.perf_counter() - t0)
            history.append(m)
            score = test_acc if test_acc is not None else train_acc
            if score > best_acc:
                best_acc, best_w, best_epoch = score, w.copy(), epoch
                if out is not None:
                    save_checkpoint(out / "checkpoint_best.txt", spec, best_w, config.seed, epoch)
            if writer is not None:
                writer.writerow(m.row())
                metrics_file.flush()
            logger.info("epoch %d loss %.5f train %.4f test %s lr %.5f (%.1fs)", epoch, m.mean_loss,
                        train_acc, "-" if test_acc is None else f"{test_acc:.4f}", eta, m.wall_time)
            if on_epoch is not None:
                on_epoch(m)
    finally:
        if pool is not None:
            pool.shutdown()
        if writer is not None:
            metrics_file.close()

    if out is not None:
        save_checkpoint(out / "checkpoint_final.txt", spec, w, config.seed, config.epochs - 1)
    return TrainResult(w, best_w, best_epoch, history)
