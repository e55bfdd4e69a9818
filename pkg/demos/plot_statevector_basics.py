"""
Statevectors and rotation gates
===============================

A register of ``n`` qubits is a dense vector of ``2**n`` complex amplitudes.
Qubit 0 is the least significant bit of the basis index.
"""

import math

import numpy as np

from tqnn import Statevector, apply_cnot, apply_single_qubit, basis_state, probabilities, rotation_matrix

# start in |000>
state = basis_state(3, 0)
print("initial amplitudes:", state.amps.round(3))

# a quarter turn about X on qubit 0 sends |000> to -i|001>
apply_single_qubit(state, 0, rotation_matrix("X", math.pi / 2))
print("after Rx(pi/2) on qubit 0:", state.amps.round(3))

# the CNOT copies qubit 0 into qubit 2: -i|101>, basis index 5
apply_cnot(state, 0, 2)
print("after CNOT 0->2, nonzero index:", np.flatnonzero(np.abs(state.amps) > 1e-12))

# %%
# Rotations are exact exponentials of Pauli generators, so a half-angle
# rotation builds an even superposition.

plus = basis_state(1, 0)
apply_single_qubit(plus, 0, rotation_matrix("Y", math.pi / 4))
print("Ry(pi/4)|0> probabilities:", probabilities(plus).round(6))

# %%
# Snapshots are plain bytes and round trip exactly.

blob = state.to_bytes()
print("snapshot size:", len(blob), "bytes; identical after reload:",
      np.array_equal(Statevector.from_bytes(blob).amps, state.amps))
