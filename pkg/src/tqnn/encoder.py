"""Amplitude encoding of images and label targets.

Images are 2-D float arrays ``(height, width)`` with intensities in ``[0, 1]``;
pixel ``(r, c)`` maps to basis index ``r * width + c`` (row-major).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevector import Statevector, basis_state, num_qubits_for

NUM_CLASSES = 10


@dataclass(frozen=True)
class LabelState:
    class_index: int
    target: Statevector


def check_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("pixel intensities must lie in [0, 1]")
    return img


def zero_pad(img, out_w: int, out_h: int) -> np.ndarray:
    """Center ``img`` on a zero canvas of ``out_h x out_w`` pixels.

    The offset on each axis is ``(out - in) // 2``, so a 28x28 digit padded
    to 32x32 gets a two-pixel border on every side.
    """
    img = check_image(img)
    h, w = img.shape
    if out_w < w or out_h < h:
        raise ValueError(f"cannot pad {h}x{w} image down to {out_h}x{out_w}")
    size = out_w * out_h
    if size & (size - 1):
        raise ValueError(f"padded size {out_h}x{out_w} is not a power of two")
    top, left = (out_h - h) // 2, (out_w - w) // 2
    out = np.zeros((out_h, out_w))
    out[top:top + h, left:left + w] = img
    return out


def amplitude_encode(img) -> Statevector:
    x = np.asarray(img, dtype=np.float64).ravel()
    n = num_qubits_for(x.size)
    peak = np.abs(x).max()
    if peak == 0.0:
        raise ValueError("cannot amplitude-encode an all-zero image")
    x = x / peak  # guards the norm against underflow
    return Statevector(n, (x / np.linalg.norm(x)).astype(np.complex128))


def amplitude_encode_batch(images) -> np.ndarray:
    """Encode a stack ``(m, h, w)`` of images into an ``(m, h*w)`` amplitude array."""
    x = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    num_qubits_for(x.shape[1])
    peaks = np.abs(x).max(axis=1) if x.size else np.zeros(len(x))
    if np.any(peaks == 0.0):
        bad = int(np.flatnonzero(peaks == 0.0)[0])
        raise ValueError(f"image {bad} is all zero and cannot be amplitude-encoded")
    x = x / peaks[:, None]
    return (x / np.linalg.norm(x, axis=1, keepdims=True)).astype(np.complex128)


def encode_label(class_index: int, num_qubits: int) -> LabelState:
    if not 0 <= class_index < NUM_CLASSES:
        raise ValueError(f"class index {class_index} outside [0, {NUM_CLASSES})")
    if (1 << num_qubits) < NUM_CLASSES:
        raise ValueError(f"{num_qubits} qubits cannot hold {NUM_CLASSES} classes")
    return LabelState(class_index, basis_state(num_qubits, class_index))


def readout_distribution(state, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """Class distribution: the first ``num_classes`` basis probabilities, renormalized.

    Accepts a :class:`Statevector` or a raw amplitude array (with optional
    leading batch axes).  When the retained mass is below 1e-12 the uniform
    distribution is returned instead.
    """
    amps = state.amps if isinstance(state, Statevector) else np.asarray(state)
    if num_classes > amps.shape[-1]:
        raise ValueError(f"{num_classes} classes exceed state dimension {amps.shape[-1]}")
    p = np.abs(amps[..., :num_classes]) ** 2
    return normalize_readout(p)


def normalize_readout(p: np.ndarray) -> np.ndarray:
    mass = p.sum(axis=-1, keepdims=True)
    tiny = mass < 1e-12
    safe = np.where(tiny, 1.0, mass)
    return np.where(tiny, 1.0 / p.shape[-1], p / safe)
