"""Quantum dropout for data re-uploading QNNs: simulation, training,
dropout strategies, and overparametrization/expressibility/entanglement
diagnostics."""

from .circuits import (CircuitTemplate, build_classification_qnn,
                       build_regression_qnn, build_template,
                       embedding_angles, model_output)
from .dropout import (DropoutConfig, DropoutMask, drop_probability,
                      max_drop_params, rescale_params, sample_mask)
from .gradients import QfimReport, gradient, qfim, qfim_rank
from .statesim import (Gate, StateVector, apply_gate, expectation_z,
                       fidelity, run_circuit, subset_purity)
from .training import (TrainConfig, TrainRun, accuracy, adam_step, cce_loss,
                       grid_search, mse_loss, multi_run, train)

__version__ = "0.1.0"
