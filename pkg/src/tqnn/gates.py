"""Fixed gates, parameterized Pauli rotations and a dense exponential oracle."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import reduce
from typing import Union

import numpy as np


class Axis(str, enum.Enum):
    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"


_PAULI = {
    Axis.I: np.array([[1, 0], [0, 1]], dtype=np.complex128),
    Axis.X: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    Axis.Y: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    Axis.Z: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
for _m in _PAULI.values():
    _m.setflags(write=False)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)
HADAMARD.setflags(write=False)

FIXED_GATES = {
    "X": _PAULI[Axis.X],
    "Y": _PAULI[Axis.Y],
    "Z": _PAULI[Axis.Z],
    "H": HADAMARD,
}

MAX_EXPM_QUBITS = 5


def pauli_matrix(axis) -> np.ndarray:
    return _PAULI[Axis(axis)].copy()


def rotation_matrix(axis, w: float, dt: float = 1.0) -> np.ndarray:
    """Return ``exp(-i w dt sigma) = cos(w dt) I - i sin(w dt) sigma``.

    Pauli matrices square to the identity, so the exponential collapses to
    this two-term closed form; no series or eigendecomposition is needed.
    """
    axis = Axis(axis)
    if axis is Axis.I:
        raise ValueError("rotations about I are a pure global phase and are not supported")
    if not (math.isfinite(w) and math.isfinite(dt)):
        raise ValueError(f"rotation parameters must be finite (w={w}, dt={dt})")
    theta = w * dt
    return math.cos(theta) * _PAULI[Axis.I] - 1j * math.sin(theta) * _PAULI[axis]


def dense_expm(h: np.ndarray, t: float) -> np.ndarray:
    """Exact ``exp(-i h t)`` for a small Hermitian ``h`` by scaling and squaring.

    Used only as a reference for checking the product-of-rotations circuits;
    the argument is scaled down to norm <= 1/2, summed as a Taylor series to
    machine precision and then squared back up.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("h must be a square matrix")
    dim = h.shape[0]
    if dim > (1 << MAX_EXPM_QUBITS) or dim & (dim - 1):
        raise ValueError(f"dense_expm supports power-of-two sizes up to {1 << MAX_EXPM_QUBITS}")
    if not np.allclose(h, h.conj().T, rtol=0.0, atol=1e-10):
        raise ValueError("h must be Hermitian")
    if not math.isfinite(t):
        raise ValueError("t must be finite")

    a = -1j * t * h
    norm = np.linalg.norm(a, 1)
    squarings = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    a = a / (1 << squarings)

    result = np.eye(dim, dtype=np.complex128)
    term = np.eye(dim, dtype=np.complex128)
    for k in range(1, 40):
        term = term @ a / k
        result = result + term
        if np.abs(term).max() < 1e-18:
            break
    for _ in range(squarings):
        result = result @ result
    return result


def embed(u: np.ndarray, target: int, num_qubits: int) -> np.ndarray:
    """Full ``2**n x 2**n`` matrix of a single-qubit ``u`` acting on ``target``.

    Qubit 0 is the least significant bit, so it is the rightmost Kronecker factor.
    """
    factors = [u if q == target else _PAULI[Axis.I] for q in reversed(range(num_qubits))]
    return reduce(np.kron, factors)


def cnot_matrix(control: int, target: int, num_qubits: int) -> np.ndarray:
    dim = 1 << num_qubits
    m = np.zeros((dim, dim), dtype=np.complex128)
    for j in range(dim):
        m[j ^ (((j >> control) & 1) << target), j] = 1.0
    return m


@dataclass(frozen=True)
class Rotation:
    axis: Axis
    target: int
    weight_index: int

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        if self.axis is Axis.I:
            raise ValueError("Rotation axis must be X, Y or Z")


@dataclass(frozen=True)
class Fixed:
    name: str
    target: int

    def __post_init__(self):
        if self.name not in FIXED_GATES:
            raise ValueError(f"unknown fixed gate {self.name!r}")


@dataclass(frozen=True)
class CNot:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise ValueError("CNOT control and target must differ")


GateOp = Union[Rotation, Fixed, CNot]
