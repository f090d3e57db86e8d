"""rfdae: an LSTM denoising-autoencoder classifier for radio signals.

A compact sequence model trained to reconstruct masked radio signals while
classifying their modulation or technology type, plus the surrounding tooling:
synthetic signal generation, binary dataset/checkpoint formats, evaluation
reports and throughput benchmarking.
"""

__version__ = "0.1.0"

from .bench import BenchResult, bench
from .checkpoint import checkpoint_read, checkpoint_write
from .data import (Dataset, SignalRecord, dataset_read, dataset_write,
                   iq_to_amp_phase, prepare_features, psd_features)
from .evaluate import EvalReport, evaluate, report
from .layers import DenseLayer, DropoutSpec, GradCheckReport, dropout_apply, grad_check
from .lstm import LstmCellParams, LstmStack, LstmState, cell_step
from .model import (DaeModel, LossBreakdown, ModelConfig, corrupt, count_flops,
                    count_params, loss)
from .numeric import NumericError, RfdaeError, Rng, ShapeError, matmul, relu, sigmoid, softmax, tanh_act
from .optim import AdamState, adam_step
from .synth import ChannelSpec, make_synthetic_dataset, synthesize
from .train import (TrainConfig, TrainLog, calibrate_input_kernels,
                    split_indices, train)

__all__ = [
    "AdamState", "BenchResult", "ChannelSpec", "DaeModel", "Dataset", "DenseLayer",
    "DropoutSpec", "EvalReport", "GradCheckReport", "LossBreakdown", "LstmCellParams",
    "LstmStack", "LstmState", "ModelConfig", "NumericError", "RfdaeError", "Rng",
    "ShapeError", "SignalRecord", "TrainConfig", "TrainLog", "adam_step", "bench",
    "cell_step", "checkpoint_read", "checkpoint_write", "corrupt", "count_flops",
    "count_params", "dataset_read", "dataset_write", "dropout_apply", "evaluate",
    "grad_check", "iq_to_amp_phase", "loss", "make_synthetic_dataset", "matmul",
    "prepare_features", "psd_features", "relu", "report", "sigmoid", "softmax",
    "calibrate_input_kernels", "split_indices", "synthesize", "tanh_act", "train",
]
