"""Time-evolution quantum neural networks on a dense statevector simulator.

The network is an ordered product of Pauli rotations ``exp(-i w_k dt sigma_k)``
interleaved with CNOTs, applied to amplitude-encoded images and trained by
mini-batch gradient descent with exact circuit gradients.
"""

__version__ = "0.1.0"

from .statevector import (
    StateError,
    Statevector,
    apply_cnot,
    apply_single_qubit,
    basis_state,
    inner_product,
    probabilities,
)
from .gates import Axis, CNot, Fixed, Rotation, dense_expm, pauli_matrix, rotation_matrix
from .encoder import (
    LabelState,
    amplitude_encode,
    encode_label,
    readout_distribution,
    zero_pad,
)
from .circuit import (
    CircuitSpec,
    build_ansatz,
    circuit_unitary,
    forward,
    forward_with_generator_insertion,
    init_weights,
    load_checkpoint,
    save_checkpoint,
)
from .losses import (
    GradEngine,
    LossKind,
    batch_loss_grad,
    fidelity_grad,
    fidelity_loss,
    finite_difference_grad,
    parameter_shift_grad,
    probability_mse_grad,
    probability_mse_loss,
)
from .trainer import EpochMetrics, TrainConfig, TrainResult, evaluate, predict, sgd_step, train
from .mnist import (
    RawDataset,
    downscale,
    filter_classes,
    load_split,
    parse_idx_images,
    parse_idx_labels,
    prepare,
)
