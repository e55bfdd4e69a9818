"""Build the bundled ``data/mnist5k`` IDX files from mlxtend's 5,000-digit MNIST sample.

mlxtend (BSD-3) ships ``mlxtend/data/data/mnist_5k.csv.gz``: 500 images per
digit drawn from the MNIST training set, one row per image (784 pixel bytes
followed by the label), sorted by label.  This script splits each class into
the first 400 rows (written as the ``train-*`` files) and the last 100 rows
(written as the ``t10k-*`` files), so the two splits are disjoint.

Usage::

    pip download --no-deps mlxtend==0.23.1 -d /tmp/dl
    python scripts/make_mnist5k.py /tmp/dl/mlxtend-0.23.1-py3-none-any.whl data/mnist5k

The canonical full MNIST files can be dropped into any directory with the
standard names (``train-images-idx3-ubyte.gz`` ...) and used the same way.
"""

import argparse
import gzip
import io
import zipfile

import numpy as np

from tqnn.mnist import RawDataset, write_split

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 400


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="mlxtend wheel or an extracted mnist_5k.csv[.gz]")
    parser.add_argument("out_dir")
    args = parser.parse_args()

    if args.source.endswith(".whl"):
        raw = zipfile.ZipFile(args.source).read(MEMBER)
    else:
        raw = open(args.source, "rb").read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    pixels = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1]

    train_idx, test_idx = [], []
    for digit in range(10):
        rows = np.flatnonzero(labels == digit)
        train_idx.extend(rows[:TRAIN_PER_CLASS])
        test_idx.extend(rows[TRAIN_PER_CLASS:])
    for split, idx in (("train", train_idx), ("test", test_idx)):
        idx = np.asarray(idx)
        write_split(args.out_dir, RawDataset(pixels[idx] / 255.0, labels[idx]), split)
        print(f"{split}: {idx.size} images -> {args.out_dir}")


if __name__ == "__main__":
    main()
