"""Deep-learning Gaussian process surrogates for stochastic multi-output simulators."""
from .data_io import TrainingDataset, load_motorcycle, load_xy_csv
from .errors import (ConfigError, DlgpError, DomainError, FormatError, InputError, NumericalError,
                     ResourceError, TrainingError)
from .gp_core import KernelHyper, gp_posterior, log_marginal
from .kernels import BACKEND
from .model import (DlgpModel, TrainConfig, dlgp_gradients, dlgp_log_marginal, init_model, load_model,
                    predict, save_model, train)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConfigError", "DlgpError", "DlgpModel", "DomainError", "FormatError", "InputError",
    "KernelHyper", "NumericalError", "ResourceError", "TrainConfig", "TrainingDataset", "TrainingError",
    "dlgp_gradients", "dlgp_log_marginal", "gp_posterior", "init_model", "load_model", "load_motorcycle",
    "load_xy_csv", "log_marginal", "predict", "save_model", "train",
]
