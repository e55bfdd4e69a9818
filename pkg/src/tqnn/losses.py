"""Losses and gradient engines.

Two losses are supported:

``fidelity``
    ``L = || N|psi> - |y> ||^2 = 2 - 2 Re <y|N|psi>`` for unit vectors.
``probmse``
    squared error (summed over the 10 classes) between the renormalized
    class readout and the one-hot label.

Four gradient engines are supported:

``analytic``
    inserts ``-i dt sigma_k`` next to the ``k``-th rotation, giving
    ``dN/dw_k |psi>`` exactly.  For the fidelity loss this is the whole
    story; for ``probmse`` the probability derivatives
    ``dp_j/dw_k = 2 Re(conj(phi_j) (dN/dw_k psi)_j)`` are chained through the
    readout by hand.
``shift``
    exact two-point shift rules.  An amplitude is a first-order trigonometric
    polynomial in ``w_k dt`` (shift ``pi / (2 dt)``, scale ``dt / 2``); a
    probability is second order (shift ``pi / (4 dt)``, scale ``dt``).
``fd``
    central finite differences of the scalar loss.
``adjoint``
    the same derivative terms as ``analytic``, accumulated in one reverse
    sweep (cost linear rather than quadratic in the number of weights).
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .circuit import CircuitSpec, _check_weights, backpropagate, evolve
from .encoder import NUM_CLASSES, LabelState, normalize_readout
from .statevector import Statevector


class LossKind(str, enum.Enum):
    FIDELITY = "fidelity"
    PROB_MSE = "probmse"


class GradEngine(str, enum.Enum):
    ANALYTIC = "analytic"
    PARAM_SHIFT = "shift"
    FINITE_DIFF = "fd"
    ADJOINT = "adjoint"


DEFAULT_FD_STEP = 1e-5


# -- vectorized pieces ----------------------------------------------------------


def _one_hot(labels, dim: int) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.zeros(labels.shape + (dim,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def _losses(phi: np.ndarray, targets: np.ndarray, labels: np.ndarray, kind: LossKind) -> np.ndarray:
    """Per-row loss for evolved states ``phi`` (rows aligned with targets/labels)."""
    if kind is LossKind.FIDELITY:
        overlap = np.einsum("...j,...j->...", targets.conj(), phi)
        return 2.0 - 2.0 * overlap.real
    q = normalize_readout(np.abs(phi[..., :NUM_CLASSES]) ** 2)
    return np.sum((q - _one_hot(labels, NUM_CLASSES)) ** 2, axis=-1)


def _readout_chain(p: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """``dL/dp_j`` for the probmse loss given the first-10 probabilities ``p``."""
    mass = p.sum(axis=-1, keepdims=True)
    tiny = mass < 1e-12
    safe = np.where(tiny, 1.0, mass)
    q = p / safe
    r = q - _one_hot(labels, NUM_CLASSES)
    g = 2.0 / safe * (r - np.sum(r * q, axis=-1, keepdims=True))
    # uniform fallback is locally constant
    return np.where(tiny, 0.0, g)


def batch_loss_grad(spec: CircuitSpec, w, states, labels=None, targets=None,
                    kind=LossKind.PROB_MSE, engine=GradEngine.PARAM_SHIFT,
                    h: float = DEFAULT_FD_STEP):
    """Per-sample losses and gradients for a stack of encoded inputs.

    Args:
        spec: circuit.
        w: ``(P,)`` weights.
        states: ``(M, D)`` input amplitudes.
        labels: ``(M,)`` class indices.  Required for ``probmse``; for
            ``fidelity`` they define basis-state targets unless ``targets``
            is given.
        targets: optional ``(M, D)`` target amplitudes for ``fidelity``.
        kind, engine: loss and gradient engine.
        h: finite-difference step.

    Returns:
        ``(losses, grads)`` with shapes ``(M,)`` and ``(M, P)``.
    """
    kind, engine = LossKind(kind), GradEngine(engine)
    w = _check_weights(spec, w)
    states = np.asarray(states, dtype=np.complex128)
    m, dim = states.shape
    p_count = spec.num_params
    if labels is None:
        if kind is LossKind.PROB_MSE or targets is None:
            raise ValueError("labels are required")
        labels = np.zeros(m, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if kind is LossKind.FIDELITY and targets is None:
        targets = _one_hot(labels, dim).astype(np.complex128)
    if targets is not None:
        targets = np.asarray(targets, dtype=np.complex128)

    phi = evolve(spec, w, states)
    losses = _losses(phi, targets, labels, kind)
    idx = np.arange(p_count)

    if engine is GradEngine.ANALYTIC:
        rows = np.repeat(states, p_count, axis=0)
        d = evolve(spec, w, rows, insert=np.tile(idx, m)).reshape(m, p_count, dim)
        if kind is LossKind.FIDELITY:
            grads = -2.0 * np.einsum("mj,mkj->mk", targets.conj(), d).real
        else:
            dp = 2.0 * (phi[:, None, :NUM_CLASSES].conj() * d[..., :NUM_CLASSES]).real
            chain = _readout_chain(np.abs(phi[:, :NUM_CLASSES]) ** 2, labels)
            grads = np.einsum("mkj,mj->mk", dp, chain)
        return losses, grads

    if engine is GradEngine.ADJOINT:
        if kind is LossKind.FIDELITY:
            costate = -targets
        else:
            chain = _readout_chain(np.abs(phi[:, :NUM_CLASSES]) ** 2, labels)
            costate = np.zeros_like(phi)
            costate[:, :NUM_CLASSES] = chain * phi[:, :NUM_CLASSES]
        return losses, backpropagate(spec, w, phi, costate)

    if engine is GradEngine.PARAM_SHIFT:
        shift = math.pi / (2 * spec.dt) if kind is LossKind.FIDELITY else math.pi / (4 * spec.dt)
    else:
        if not h > 0:
            raise ValueError(f"finite-difference step must be positive, got {h}")
        shift = h
    eye = np.eye(p_count) * shift
    shifted_w = np.concatenate([w + eye, w - eye])                  # (2P, P)
    wrows = np.tile(shifted_w, (m, 1))                              # (M*2P, P)
    rows = np.repeat(states, 2 * p_count, axis=0)
    phis = evolve(spec, wrows, rows).reshape(m, 2, p_count, dim)

    if engine is GradEngine.FINITE_DIFF:
        lab = np.broadcast_to(labels[:, None, None], (m, 2, p_count))
        tgt = None if targets is None else np.broadcast_to(targets[:, None, None, :], phis.shape)
        ls = _losses(phis, tgt, lab, kind)
        return losses, (ls[:, 0] - ls[:, 1]) / (2 * h)

    if kind is LossKind.FIDELITY:
        amp = np.einsum("mj,mskj->msk", targets.conj(), phis).real   # Re <y|phi±>
        grads = -2.0 * (spec.dt / 2.0) * (amp[:, 0] - amp[:, 1])
    else:
        p = np.abs(phis[..., :NUM_CLASSES]) ** 2
        dp = spec.dt * (p[:, 0] - p[:, 1])                          # (M, P, 10)
        chain = _readout_chain(np.abs(phi[:, :NUM_CLASSES]) ** 2, labels)
        grads = np.einsum("mkj,mj->mk", dp, chain)
    return losses, grads


# -- single-sample API ------------------------------------------------------------


def _target_amps(y, num_qubits: int) -> np.ndarray:
    sv = y.target if isinstance(y, LabelState) else y
    if not isinstance(sv, Statevector):
        raise TypeError("target must be a LabelState or Statevector")
    if sv.num_qubits != num_qubits:
        raise ValueError(f"target has {sv.num_qubits} qubits, circuit has {num_qubits}")
    return sv.amps


def _input_amps(psi: Statevector, spec: CircuitSpec) -> np.ndarray:
    if psi.num_qubits != spec.num_qubits:
        raise ValueError(f"input has {psi.num_qubits} qubits, circuit expects {spec.num_qubits}")
    return psi.amps


def fidelity_loss(spec: CircuitSpec, w, psi: Statevector, y) -> float:
    """``2 - 2 Re <y|N|psi>``."""
    yv = _target_amps(y, spec.num_qubits)
    phi = evolve(spec, _check_weights(spec, w), _input_amps(psi, spec))
    return float(2.0 - 2.0 * np.vdot(yv, phi).real)


def fidelity_grad(spec: CircuitSpec, w, psi: Statevector, y) -> np.ndarray:
    """``dL/dw_k = -2 Re <y| dN/dw_k |psi>`` for every ``k``."""
    yv = _target_amps(y, spec.num_qubits)
    _, g = batch_loss_grad(spec, w, _input_amps(psi, spec)[None], targets=yv[None],
                           kind=LossKind.FIDELITY, engine=GradEngine.ANALYTIC)
    return g[0]


def probability_mse_loss(spec: CircuitSpec, w, psi: Statevector, class_index: int) -> float:
    if not 0 <= class_index < NUM_CLASSES:
        raise ValueError(f"class index {class_index} outside [0, {NUM_CLASSES})")
    phi = evolve(spec, _check_weights(spec, w), _input_amps(psi, spec))
    return float(_losses(phi, None, np.asarray(class_index), LossKind.PROB_MSE))


def probability_mse_grad(spec: CircuitSpec, w, psi: Statevector, class_index: int,
                         engine=GradEngine.PARAM_SHIFT) -> np.ndarray:
    if not 0 <= class_index < NUM_CLASSES:
        raise ValueError(f"class index {class_index} outside [0, {NUM_CLASSES})")
    _, g = batch_loss_grad(spec, w, _input_amps(psi, spec)[None], labels=[class_index],
                           kind=LossKind.PROB_MSE, engine=engine)
    return g[0]


def finite_difference_grad(loss_fn, spec: CircuitSpec, w, sample, h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central differences of ``loss_fn(spec, w, *sample)`` in every weight."""
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    w = _check_weights(spec, w)
    grad = np.empty_like(w)
    for k in range(w.size):
        wp, wm = w.copy(), w.copy()
        wp[k] += h
        wm[k] -= h
        grad[k] = (loss_fn(spec, wp, *sample) - loss_fn(spec, wm, *sample)) / (2 * h)
    return grad


def parameter_shift_grad(spec: CircuitSpec, w, psi: Statevector, y_or_class, loss_kind) -> np.ndarray:
    """Exact shift-rule gradient of the chosen loss.

    ``y_or_class`` is a target (``LabelState`` / ``Statevector``) for the
    fidelity loss and a class index for ``probmse``.
    """
    kind = LossKind(loss_kind)
    if kind is LossKind.FIDELITY:
        yv = _target_amps(y_or_class, spec.num_qubits)
        _, g = batch_loss_grad(spec, w, _input_amps(psi, spec)[None], targets=yv[None],
                               kind=kind, engine=GradEngine.PARAM_SHIFT)
        return g[0]
    return probability_mse_grad(spec, w, psi, int(y_or_class), GradEngine.PARAM_SHIFT)
