"""
Depth versus accuracy
=====================

Trains the ten-class problem at several depths and prints the final test
accuracy of each.  A full sweep takes a while on one core; ``--epochs``
shortens it.
"""

import argparse
from pathlib import Path

from tqnn import TrainConfig, build_ansatz, filter_classes, load_split, prepare, train

parser = argparse.ArgumentParser()
parser.add_argument("--epochs", type=int, default=30)
parser.add_argument("--layers", type=int, nargs="+", default=[2, 4, 6, 10])
args = parser.parse_args()

data_dir = Path(__file__).resolve().parents[1] / "data" / "mnist5k"
train_set = prepare(filter_classes(load_split(data_dir, "train"), range(10), 200), 32, 4)
test_set = prepare(filter_classes(load_split(data_dir, "test"), range(10), 50), 32, 4)

for layers in args.layers:
    res = train(build_ansatz(6, layers), train_set,
                TrainConfig(epochs=args.epochs, grad_engine="adjoint"), test_set=test_set)
    print(f"{layers:3d} layers: final test accuracy {res.final.test_accuracy:.3f}")
