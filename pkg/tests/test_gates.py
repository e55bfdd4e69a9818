import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from tqnn.gates import (
    Axis,
    CNot,
    Rotation,
    cnot_matrix,
    dense_expm,
    embed,
    pauli_matrix,
    rotation_matrix,
)

from conftest import kron_oracle

finite = st.floats(-20, 20, allow_nan=False)
step = st.floats(0.01, 3.0)
axes = st.sampled_from(["X", "Y", "Z"])


def test_pauli_matrices():
    np.testing.assert_array_equal(pauli_matrix("X"), [[0, 1], [1, 0]])
    np.testing.assert_array_equal(pauli_matrix("Y"), [[0, -1j], [1j, 0]])
    np.testing.assert_array_equal(pauli_matrix("Z"), [[1, 0], [0, -1]])
    np.testing.assert_array_equal(pauli_matrix(Axis.I), np.eye(2))


def test_rotation_special_angles():
    np.testing.assert_allclose(rotation_matrix("X", 0.0, 1.0), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(rotation_matrix("X", math.pi / 2, 1.0), -1j * pauli_matrix("X"), atol=1e-15)
    # only the product w*dt matters
    np.testing.assert_allclose(rotation_matrix("Y", 0.5, 2.0), rotation_matrix("Y", 1.0, 1.0))


def test_rotation_closed_form_layout():
    w, dt = 0.37, 1.3
    c, s = math.cos(w * dt), math.sin(w * dt)
    np.testing.assert_allclose(rotation_matrix("X", w, dt), [[c, -1j * s], [-1j * s, c]])


def test_rotation_rejects_bad_input():
    with pytest.raises(ValueError):
        rotation_matrix("X", math.inf)
    with pytest.raises(ValueError):
        rotation_matrix("X", 1.0, math.nan)
    with pytest.raises(ValueError):
        rotation_matrix("I", 1.0)


@settings(max_examples=200, deadline=None)
@given(axes, finite, step)
def test_rotation_properties(axis, w, dt):
    u = rotation_matrix(axis, w, dt)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(rotation_matrix(axis, -w, dt), u.conj().T, atol=1e-15)
    np.testing.assert_allclose(rotation_matrix(axis, w + 2 * math.pi / dt, dt), u, atol=1e-10)
    oracle = dense_expm(w * pauli_matrix(axis), dt)
    np.testing.assert_allclose(u, oracle, rtol=0, atol=1e-12)


def test_dense_expm_examples():
    np.testing.assert_array_equal(dense_expm(np.zeros((4, 4)), 3.0), np.eye(4))
    np.testing.assert_allclose(dense_expm(pauli_matrix("X"), math.pi), -np.eye(2), atol=1e-13)


def test_dense_expm_matches_scipy(rng):
    for n in range(1, 6):
        d = 1 << n
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = (a + a.conj().T) / 2
        t = rng.uniform(-2, 2)
        u = dense_expm(h, t)
        np.testing.assert_allclose(u, scipy.linalg.expm(-1j * h * t), atol=1e-10)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(d), atol=1e-9)


def test_dense_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        dense_expm(np.array([[0, 1], [0, 0]]), 1.0)
    with pytest.raises(ValueError):
        dense_expm(np.eye(64), 1.0)


def test_commuting_generators_factorize():
    w1, w2, t = 0.8, -1.7, 0.9
    z = pauli_matrix("Z")
    h = np.kron(z, np.eye(2)) * w1 + np.kron(np.eye(2), z) * w2
    product = np.kron(rotation_matrix("Z", w1, t), np.eye(2)) @ np.kron(np.eye(2), rotation_matrix("Z", w2, t))
    np.testing.assert_allclose(dense_expm(h, t), product, atol=1e-12)


def test_embed_matches_enumeration(rng):
    u = rotation_matrix("Y", 0.4) @ rotation_matrix("X", 1.1)
    for n in (1, 2, 3, 4):
        for t in range(n):
            np.testing.assert_allclose(embed(u, t, n), kron_oracle(u, t, n), atol=1e-15)


def test_cnot_matrix():
    # control qubit 1 (value 2), target qubit 0
    expected = np.eye(4)[[0, 1, 3, 2]]
    np.testing.assert_array_equal(cnot_matrix(1, 0, 2), expected)


def test_gate_op_validation():
    with pytest.raises(ValueError):
        Rotation("I", 0, 0)
    with pytest.raises(ValueError):
        CNot(1, 1)
    assert Rotation("X", 0, 0).axis is Axis.X
