"""Dense statevector storage and the primitive kernels built on it.

Basis index ``j`` encodes the register with qubit 0 as the least significant
bit, so ``|10>`` (qubit 1 set) lives at index 2.

The low-level kernels (``apply_1q``, ``apply_cnot_inplace``...) work on plain
complex arrays whose *last* axis holds the ``2**n`` amplitudes.  Any leading
axes are treated as a batch, which is how the training code evaluates many
samples and many parameter variants in one pass.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 26
NORM_TOL = 1e-10
UNITARY_TOL = 1e-12

SNAPSHOT_MAGIC = b"QSV1"


class StateError(ValueError):
    """Raised when a state or an operation on it violates an invariant."""


@dataclass
class Statevector:
    """An ``num_qubits``-qubit pure state held as ``2**num_qubits`` amplitudes."""

    num_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise StateError(f"num_qubits must be in [1, {MAX_QUBITS}], got {self.num_qubits}")
        amps = np.asarray(self.amps, dtype=np.complex128)
        if amps.shape != (1 << self.num_qubits,):
            raise StateError(
                f"expected {1 << self.num_qubits} amplitudes, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise StateError("amplitudes must be finite")
        self.amps = amps
        self.check_norm()

    @classmethod
    def from_amplitudes(cls, amps) -> "Statevector":
        amps = np.asarray(amps, dtype=np.complex128)
        n = num_qubits_for(amps.shape[-1])
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return self.amps.shape[0]

    def norm_squared(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def check_norm(self, tol: float = NORM_TOL) -> None:
        err = abs(self.norm_squared() - 1.0)
        if err > tol:
            raise StateError(f"state is not normalized (|norm^2 - 1| = {err:.3e})")

    def copy(self) -> "Statevector":
        return Statevector(self.num_qubits, self.amps.copy())

    def to_bytes(self) -> bytes:
        """Serialize as ``QSV1`` + u32 num_qubits + interleaved little-endian f64 (re, im)."""
        body = np.ascontiguousarray(self.amps, dtype="<c16").tobytes()
        return SNAPSHOT_MAGIC + struct.pack("<I", self.num_qubits) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Statevector":
        if len(data) < 8 or data[:4] != SNAPSHOT_MAGIC:
            raise StateError("not a QSV1 snapshot (bad magic)")
        (n,) = struct.unpack_from("<I", data, 4)
        if not 1 <= n <= MAX_QUBITS:
            raise StateError(f"snapshot declares {n} qubits")
        expected = 8 + 16 * (1 << n)
        if len(data) != expected:
            raise StateError(f"snapshot length {len(data)} != expected {expected}")
        amps = np.frombuffer(data, dtype="<c16", offset=8).astype(np.complex128)
        return cls(n, amps)


def num_qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise StateError(f"dimension {dim} is not a power of two >= 2")
    return n


def basis_state(num_qubits: int, index: int) -> Statevector:
    dim = 1 << num_qubits
    if not 0 <= index < dim:
        raise IndexError(f"basis index {index} out of range for {num_qubits} qubits")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return Statevector(num_qubits, amps)


def inner_product(bra: Statevector, ket: Statevector) -> complex:
    """Return ``<bra|ket>`` (the bra is conjugated)."""
    if bra.num_qubits != ket.num_qubits:
        raise StateError(f"dimension mismatch: {bra.num_qubits} vs {ket.num_qubits} qubits")
    return complex(np.vdot(bra.amps, ket.amps))


def probabilities(state: Statevector) -> np.ndarray:
    return np.abs(state.amps) ** 2


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.allclose(u @ u.conj().T, np.eye(u.shape[0]), rtol=0.0, atol=tol))


# -- batched kernels ---------------------------------------------------------


def _split(amps: np.ndarray, n: int, target: int) -> np.ndarray:
    # view with axis -2 = target bit
    return amps.reshape(amps.shape[:-1] + (1 << (n - 1 - target), 2, 1 << target))


def apply_1q(amps: np.ndarray, n: int, target: int, u) -> None:
    """Apply a 2x2 matrix to ``target`` of every state in ``amps`` in place.

    ``u`` is either a single ``(2, 2)`` matrix or a stack of shape
    ``batch + (2, 2)`` giving one matrix per state.
    """
    u = np.asarray(u)
    view = _split(amps, n, target)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    if u.ndim == 2:
        u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    else:
        # broadcast one matrix per batch row over the (hi, lo) axes
        u = u[..., None, None, :, :]
        u00, u01, u10, u11 = u[..., 0, 0], u[..., 0, 1], u[..., 1, 0], u[..., 1, 1]
    view[..., 0, :] = u00 * a0 + u01 * a1
    view[..., 1, :] = u10 * a0 + u11 * a1


@lru_cache(maxsize=256)
def cnot_permutation(n: int, control: int, target: int) -> np.ndarray:
    """Index map ``new[j] = old[perm[j]]`` for a CNOT on an ``n``-qubit register."""
    idx = np.arange(1 << n)
    perm = idx ^ (((idx >> control) & 1) << target)
    perm.setflags(write=False)
    return perm


def apply_cnot_inplace(amps: np.ndarray, n: int, control: int, target: int) -> None:
    amps[...] = amps[..., cnot_permutation(n, control, target)]


# -- checked single-state API --------------------------------------------------


def _check_qubit(state: Statevector, q: int, what: str) -> None:
    if not 0 <= q < state.num_qubits:
        raise IndexError(f"{what} qubit {q} out of range for {state.num_qubits} qubits")


def apply_single_qubit(state: Statevector, target: int, u) -> Statevector:
    """Apply the unitary ``u`` to qubit ``target``, mutating and returning ``state``."""
    _check_qubit(state, target, "target")
    u = np.asarray(u, dtype=np.complex128)
    if u.shape != (2, 2) or not is_unitary(u):
        raise StateError("single-qubit gate must be a 2x2 unitary matrix")
    apply_1q(state.amps, state.num_qubits, target, u)
    return state


def apply_cnot(state: Statevector, control: int, target: int) -> Statevector:
    """Flip ``target`` on every basis state whose ``control`` bit is 1 (in place)."""
    _check_qubit(state, control, "control")
    _check_qubit(state, target, "target")
    if control == target:
        raise StateError("CNOT control and target must differ")
    apply_cnot_inplace(state.amps, state.num_qubits, control, target)
    return state
