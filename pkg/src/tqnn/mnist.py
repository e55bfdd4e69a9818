"""IDX (MNIST) parsing, serialization and desk-scale dataset preparation.

Layout (big-endian)::

    images: u32 0x00000803 | u32 count | u32 rows | u32 cols | u8 pixels...
    labels: u32 0x00000801 | u32 count | u8 labels...

Gzip-wrapped files are detected by their ``1f 8b`` header and unpacked
transparently.
"""

from __future__ import annotations

import gzip
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoder import NUM_CLASSES, amplitude_encode_batch, zero_pad

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


class IdxFormatError(ValueError):
    """Malformed IDX payload; the message carries the byte offset."""


@dataclass
class RawDataset:
    images: np.ndarray  # (m, rows, cols) float64 in [0, 1]
    labels: np.ndarray  # (m,) int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise ValueError(f"images must have shape (m, rows, cols), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise ValueError("labels must lie in [0, 9]")

    def __len__(self):
        return len(self.labels)


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == GZIP_MAGIC:
        try:
            return gzip.decompress(data)
        except (EOFError, OSError, zlib.error) as exc:
            raise IdxFormatError(f"corrupt gzip stream ({exc}) at offset 0") from exc
    return data


def _header(data: bytes, magic: int, ndims: int) -> tuple:
    need = 4 * (1 + ndims)
    if len(data) < need:
        raise IdxFormatError(f"truncated header: {len(data)} bytes, need {need} (offset {len(data)})")
    fields = struct.unpack_from(f">{1 + ndims}I", data, 0)
    if fields[0] != magic:
        raise IdxFormatError(f"bad magic 0x{fields[0]:08x} at offset 0, expected 0x{magic:08x}")
    return fields[1:]


def _payload(data: bytes, offset: int, size: int) -> np.ndarray:
    end = offset + size
    if len(data) < end:
        raise IdxFormatError(f"truncated payload: data ends at offset {len(data)}, expected {end}")
    if len(data) > end:
        raise IdxFormatError(f"{len(data) - end} trailing bytes after offset {end}")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=offset)


def parse_idx_images_raw(data: bytes) -> np.ndarray:
    """Parse an image file into a ``(count, rows, cols)`` uint8 array."""
    data = _maybe_gunzip(data)
    count, rows, cols = _header(data, IMAGE_MAGIC, 3)
    pixels = _payload(data, 16, count * rows * cols)
    return pixels.reshape(count, rows, cols).copy()


def parse_idx_images(data: bytes) -> np.ndarray:
    """Parse an image file into ``(count, rows, cols)`` floats scaled by 1/255."""
    return parse_idx_images_raw(data) / 255.0


def parse_idx_labels(data: bytes) -> np.ndarray:
    data = _maybe_gunzip(data)
    (count,) = _header(data, LABEL_MAGIC, 1)
    labels = _payload(data, 8, count)
    bad = np.flatnonzero(labels >= NUM_CLASSES)
    if bad.size:
        raise IdxFormatError(f"label {labels[bad[0]]} > 9 at offset {8 + int(bad[0])}")
    return labels.astype(np.int64)


def idx_images_bytes(images) -> bytes:
    """Serialize a ``(count, rows, cols)`` uint8 stack (or [0,1] floats) as IDX."""
    images = np.asarray(images)
    if images.dtype != np.uint8:
        images = np.rint(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)
    count, rows, cols = images.shape
    return struct.pack(">4I", IMAGE_MAGIC, count, rows, cols) + images.tobytes()


def idx_labels_bytes(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABEL_MAGIC, labels.size) + labels.tobytes()


def _find(directory: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (directory / name).exists():
            return directory / name
    raise FileNotFoundError(f"no {stem}[.gz] in {directory}")


def load_split(directory, split: str = "train") -> RawDataset:
    """Load the ``train`` or ``test`` split from a directory of IDX files."""
    directory = Path(directory)
    stems = {"train": TRAIN_FILES, "test": TEST_FILES}[split]
    images = parse_idx_images(_find(directory, stems[0]).read_bytes())
    labels = parse_idx_labels(_find(directory, stems[1]).read_bytes())
    return RawDataset(images, labels)


def write_split(directory, ds: RawDataset, split: str = "train", compress: bool = True) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stems = {"train": TRAIN_FILES, "test": TEST_FILES}[split]
    for stem, payload in zip(stems, (idx_images_bytes(ds.images), idx_labels_bytes(ds.labels))):
        if compress:
            # mtime=0 keeps the output byte-identical between runs
            (directory / (stem + ".gz")).write_bytes(gzip.compress(payload, mtime=0))
        else:
            (directory / stem).write_bytes(payload)


def downscale(img, factor: int) -> np.ndarray:
    """Block-mean pooling by an integer ``factor`` on both axes."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[-2:]
    if factor < 1 or h % factor or w % factor:
        raise ValueError(f"factor {factor} does not divide image size {h}x{w}")
    blocks = img.reshape(img.shape[:-2] + (h // factor, factor, w // factor, factor))
    return blocks.mean(axis=(-3, -1))


def filter_classes(ds: RawDataset, classes, limit_per_class=None) -> RawDataset:
    """Stable subset keeping at most ``limit_per_class`` samples of each class in ``classes``."""
    classes = set(int(c) for c in classes)
    if not classes:
        raise ValueError("classes must be nonempty")
    keep = []
    counts = dict.fromkeys(classes, 0)
    for i, label in enumerate(ds.labels):
        label = int(label)
        if label in counts and (limit_per_class is None or counts[label] < limit_per_class):
            counts[label] += 1
            keep.append(i)
    keep = np.asarray(keep, dtype=np.int64)
    return RawDataset(ds.images[keep], ds.labels[keep])


def prepare(ds: RawDataset, pad_to: int = 32, factor: int = 1) -> tuple:
    """Pad, pool and amplitude-encode a dataset.

    Returns ``(states, labels)`` with ``states`` of shape ``(m, (pad_to/factor)**2)``.
    """
    if len(ds) == 0:
        return np.zeros((0, (pad_to // factor) ** 2), dtype=np.complex128), ds.labels.copy()
    padded = np.stack([zero_pad(img, pad_to, pad_to) for img in ds.images])
    pooled = downscale(padded, factor) if factor > 1 else padded
    return amplitude_encode_batch(pooled), ds.labels.copy()
