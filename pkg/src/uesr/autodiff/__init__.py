"""Minimal reverse-mode differentiation for small recurrent actor-critic nets."""

from .checkpoint import fingerprint, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .layers import dense, gru_step, mlp_relu
from .optim import OptimizerConfig, adam_step, soft_update
from .params import Parameter, ParameterSet, gru_params, linear_params
from .sampling import Sample, sample_bernoulli, sample_categorical
from .tensor import (
    Tensor,
    categorical_entropy,
    concat,
    linear,
    log_softmax,
    pick,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    square,
    tanh,
    tensor,
)

__all__ = [
    "GradCheckReport",
    "OptimizerConfig",
    "Parameter",
    "ParameterSet",
    "Sample",
    "Tensor",
    "adam_step",
    "categorical_entropy",
    "concat",
    "dense",
    "fingerprint",
    "grad_check",
    "gru_params",
    "gru_step",
    "linear",
    "linear_params",
    "load_checkpoint",
    "log_softmax",
    "mlp_relu",
    "pick",
    "relu",
    "reshape",
    "sample_bernoulli",
    "sample_categorical",
    "save_checkpoint",
    "sigmoid",
    "soft_update",
    "softmax",
    "sqrt",
    "square",
    "tanh",
    "tensor",
]
