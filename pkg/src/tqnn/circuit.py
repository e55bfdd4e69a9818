"""Layered rotation ansatz and its forward evolution.

A circuit is an ordered tuple of gate ops.  The first op acts first on the
input ket, so the network operator is ``U_last ... U_2 U_1``.  Each rotation
``exp(-i w_k dt sigma)`` draws its weight from a flat parameter vector.

Layer ``l`` of :func:`build_ansatz` on ``n`` qubits is::

    Rx(q, w[2(l n + q)]), Ry(q, w[2(l n + q) + 1])   for q = 0 .. n-1
    CNOT(q -> (q + 1) mod n)                          for q = 0 .. n-1
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gates import FIXED_GATES, Axis, CNot, Fixed, GateOp, Rotation, cnot_matrix, embed, \
    rotation_matrix, _PAULI
from .statevector import Statevector, apply_1q, apply_cnot_inplace

INIT_SCALE = 0.1
CHECKPOINT_FORMAT = "tqnn-checkpoint/1"


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class CircuitSpec:
    num_qubits: int
    num_layers: int
    dt: float
    ops: tuple = field(repr=False)
    num_params: int

    def __post_init__(self):
        seen = []
        for op in self.ops:
            qubits = (op.control, op.target) if isinstance(op, CNot) else (op.target,)
            if any(not 0 <= q < self.num_qubits for q in qubits):
                raise ValueError(f"{op} touches a qubit outside [0, {self.num_qubits})")
            if isinstance(op, Rotation):
                seen.append(op.weight_index)
        if sorted(seen) != list(range(self.num_params)):
            raise ValueError("every weight index must be used by exactly one rotation")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be a positive finite number, got {self.dt}")

    @property
    def rotations(self) -> list:
        """Rotation ops ordered by weight index."""
        rots = [op for op in self.ops if isinstance(op, Rotation)]
        return sorted(rots, key=lambda op: op.weight_index)

    def inverse(self) -> "CircuitSpec":
        """Circuit whose forward pass with negated weights undoes this one."""
        return CircuitSpec(self.num_qubits, self.num_layers, self.dt,
                           tuple(reversed(self.ops)), self.num_params)


def build_ansatz(num_qubits: int, num_layers: int, dt: float = 1.0) -> CircuitSpec:
    if num_qubits < 2:
        raise ValueError(f"ansatz needs at least 2 qubits, got {num_qubits}")
    if num_layers < 1:
        raise ValueError(f"ansatz needs at least 1 layer, got {num_layers}")
    ops: list[GateOp] = []
    k = 0
    for _ in range(num_layers):
        for q in range(num_qubits):
            ops.append(Rotation(Axis.X, q, k))
            ops.append(Rotation(Axis.Y, q, k + 1))
            k += 2
        for q in range(num_qubits):
            ops.append(CNot(q, (q + 1) % num_qubits))
    return CircuitSpec(num_qubits, num_layers, float(dt), tuple(ops), k)


def init_weights(spec: CircuitSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=spec.num_params)


def _check_weights(spec: CircuitSpec, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != spec.num_params:
        raise ValueError(f"expected {spec.num_params} weights, got {w.shape[-1]}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


def _rotation_u(op: Rotation, w, dt: float, per_row: bool, sign: float = 1.0):
    sigma = _PAULI[op.axis]
    theta = w[..., op.weight_index] * dt
    if per_row:
        c = np.cos(theta)[:, None, None]
        s = np.sin(theta)[:, None, None]
        return c * _PAULI[Axis.I] - 1j * sign * s * sigma
    return math.cos(theta) * _PAULI[Axis.I] - 1j * sign * math.sin(theta) * sigma


def apply_op(amps: np.ndarray, op: GateOp, n: int, w, dt: float, inverse: bool = False) -> None:
    """Apply one op (or its inverse) to a stack of states in place."""
    if isinstance(op, Rotation):
        u = _rotation_u(op, w, dt, w.ndim == 2, -1.0 if inverse else 1.0)
        apply_1q(amps, n, op.target, u)
    elif isinstance(op, CNot):
        apply_cnot_inplace(amps, n, op.control, op.target)
    else:
        # X, Y, Z, H are Hermitian and unitary: self-inverse
        apply_1q(amps, n, op.target, FIXED_GATES[op.name])


def evolve(spec: CircuitSpec, w, amps: np.ndarray, insert=None) -> np.ndarray:
    """Apply the circuit to a stack of states and return the result.

    Args:
        spec: circuit to run.
        w: weights, either shared ``(P,)`` or one row per state ``(B, P)``.
        amps: ``(D,)`` or ``(B, D)`` input amplitudes; not modified.
        insert: optional ``(B,)`` integer array.  Row ``b`` with
            ``insert[b] = k >= 0`` is additionally multiplied by
            ``-i dt sigma_k`` just before rotation ``k``, which yields the
            derivative of the circuit with respect to ``w_k``.

    No validation beyond shapes; this is the hot path.
    """
    out = np.array(amps, dtype=np.complex128, copy=True)
    n, dt = spec.num_qubits, spec.dt
    w = np.asarray(w)
    if insert is not None:
        insert = np.asarray(insert)
    for op in spec.ops:
        if insert is not None and isinstance(op, Rotation):
            rows = np.flatnonzero(insert == op.weight_index)
            if rows.size:
                sub = out[rows]
                apply_1q(sub, n, op.target, -1j * dt * _PAULI[op.axis])
                out[rows] = sub
        apply_op(out, op, n, w, dt)
    return out


def backpropagate(spec: CircuitSpec, w, phi: np.ndarray, costate: np.ndarray) -> np.ndarray:
    """Reverse sweep giving ``2 Re <costate| dN/dw_k |psi>`` for every ``k``.

    ``phi`` is the forward output ``N|psi>`` and ``costate`` the loss
    sensitivity ``dL/d conj(phi)``, both ``(B, D)``.  Walking the ops
    backwards, each rotation contributes
    ``2 Re <lambda| -i dt sigma |phi_k> = 2 dt Im <lambda|sigma|phi_k>``,
    after which both vectors are pulled back through the inverse gate.
    Returns ``(B, P)``.
    """
    n, dt = spec.num_qubits, spec.dt
    w = np.asarray(w)
    phi = np.array(phi, dtype=np.complex128, copy=True)
    lam = np.array(costate, dtype=np.complex128, copy=True)
    grads = np.zeros(phi.shape[:-1] + (spec.num_params,))
    for op in reversed(spec.ops):
        if isinstance(op, Rotation):
            sphi = phi.copy()
            apply_1q(sphi, n, op.target, _PAULI[op.axis])
            grads[..., op.weight_index] = 2.0 * dt * np.einsum("...j,...j->...", lam.conj(), sphi).imag
        apply_op(phi, op, n, w, dt, inverse=True)
        apply_op(lam, op, n, w, dt, inverse=True)
    return grads


def forward(spec: CircuitSpec, w, psi: Statevector) -> Statevector:
    if psi.num_qubits != spec.num_qubits:
        raise ValueError(f"input has {psi.num_qubits} qubits, circuit expects {spec.num_qubits}")
    w = _check_weights(spec, w)
    if w.ndim != 1:
        raise ValueError("forward takes a single weight vector")
    return Statevector(spec.num_qubits, evolve(spec, w, psi.amps))


def forward_with_generator_insertion(spec: CircuitSpec, w, psi: Statevector, k: int) -> np.ndarray:
    """``dN/dw_k |psi>`` as a raw amplitude vector.

    The factor ``-i dt sigma_k`` sits immediately before the ``k``-th rotation
    (it commutes with that rotation, so before/after is immaterial).  The
    result has norm ``dt``, not 1, hence an array rather than a Statevector.
    """
    if psi.num_qubits != spec.num_qubits:
        raise ValueError(f"input has {psi.num_qubits} qubits, circuit expects {spec.num_qubits}")
    w = _check_weights(spec, w)
    if not 0 <= k < spec.num_params:
        raise IndexError(f"parameter index {k} outside [0, {spec.num_params})")
    return evolve(spec, w, psi.amps[None, :], insert=np.array([k]))[0]


def circuit_unitary(spec: CircuitSpec, w) -> np.ndarray:
    """Assemble the full ``2**n x 2**n`` circuit matrix from Kronecker products.

    Independent of :func:`evolve`; intended for small-``n`` cross-checks.
    """
    w = _check_weights(spec, w)
    n = spec.num_qubits
    u = np.eye(1 << n, dtype=np.complex128)
    for op in spec.ops:
        if isinstance(op, Rotation):
            g = embed(rotation_matrix(op.axis, w[op.weight_index], spec.dt), op.target, n)
        elif isinstance(op, CNot):
            g = cnot_matrix(op.control, op.target, n)
        else:
            g = embed(FIXED_GATES[op.name], op.target, n)
        u = g @ u
    return u


# -- checkpoints ----------------------------------------------------------------


@dataclass
class Checkpoint:
    spec: CircuitSpec
    weights: np.ndarray
    seed: int
    epoch: int


def save_checkpoint(path, spec: CircuitSpec, w, seed: int, epoch: int) -> None:
    """Write a ``key = value`` text checkpoint; weights use round-trip ``repr``."""
    w = _check_weights(spec, w)
    lines = [
        f"format = {CHECKPOINT_FORMAT}",
        f"num_qubits = {spec.num_qubits}",
        f"num_layers = {spec.num_layers}",
        f"dt = {spec.dt!r}",
        f"seed = {seed}",
        f"epoch = {epoch}",
        f"num_params = {spec.num_params}",
        "weights = " + " ".join(repr(float(x)) for x in w),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> Checkpoint:
    text = Path(path).read_text()
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"{path}:{lineno}: expected 'key = value'")
        fields[key.strip()] = value.strip()
    required = ["format", "num_qubits", "num_layers", "dt", "seed", "epoch", "num_params", "weights"]
    missing = [k for k in required if k not in fields]
    if missing:
        raise CheckpointError(f"{path}: missing fields {missing}")
    if fields["format"] != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: unsupported format {fields['format']!r}")
    try:
        spec = build_ansatz(int(fields["num_qubits"]), int(fields["num_layers"]), float(fields["dt"]))
        weights = np.array([float(x) for x in fields["weights"].split()])
        seed, epoch = int(fields["seed"]), int(fields["epoch"])
        num_params = int(fields["num_params"])
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    if num_params != spec.num_params or weights.size != spec.num_params:
        raise CheckpointError(
            f"{path}: {weights.size} weights / num_params={num_params} but the "
            f"{spec.num_qubits}-qubit {spec.num_layers}-layer ansatz has {spec.num_params}"
        )
    if not np.all(np.isfinite(weights)):
        raise CheckpointError(f"{path}: non-finite weight")
    return Checkpoint(spec, weights, seed, epoch)
