"""FRQI quantum image encoding and QRNN classifiers on a dense statevector simulator."""

from .qsim import GateOp, ShotCounts, StateVector, apply_gate, expectation_z, new_zero_state, probabilities, sample
from .frqi import (
    AngleImage,
    PixelImage,
    encode_circuit,
    encode_direct,
    qubit_budget,
    retrieve_analytic,
    retrieve_from_shots,
    scale_to_angles,
)
from .model import HeadConfig, ModelConfig, ParamVector, build_cell_schedule, count_parameters, forward, init_params
from .train import TrainConfig, cross_entropy, evaluate, fit, gradient, loss_and_gradient

__version__ = "0.1.0"
