"""
Training on zeros and ones
==========================

A six-qubit circuit with six layers learns to separate two digit classes
from 8x8 pooled images.  Pass ``--fast`` for a shorter run.
"""

import sys
from pathlib import Path

from tqnn import TrainConfig, build_ansatz, filter_classes, load_split, prepare, train

data_dir = Path(__file__).resolve().parents[1] / "data" / "mnist5k"
fast = "--fast" in sys.argv

train_set = prepare(filter_classes(load_split(data_dir, "train"), [0, 1], 50 if fast else 250), 32, 4)
test_set = prepare(filter_classes(load_split(data_dir, "test"), [0, 1], 100), 32, 4)

spec = build_ansatz(6, 6)
config = TrainConfig(epochs=3 if fast else 20, grad_engine="adjoint" if fast else "shift")
result = train(spec, train_set, config, test_set=test_set,
               on_epoch=lambda m: print(f"epoch {m.epoch:2d}  loss {m.mean_loss:.4f}  "
                                        f"test acc {m.test_accuracy:.3f}"))
print("best epoch:", result.best_epoch)
