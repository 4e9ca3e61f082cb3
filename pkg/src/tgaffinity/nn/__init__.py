"""Trainable components: autodiff, modules, optimizer, gradient checking, training."""

from .autograd import Tensor, concat, grad_enabled, log_softmax, no_grad, softmax
from .gradcheck import GradCheckReport, finite_difference_check
from .modules import GRUCell, MLP, MultiHeadAttention, NodeEncoder, ParamStore, TimeEncoder
from .optim import Adam
from .training import (
    LearnableEngine,
    TrainConfig,
    TrainResult,
    TrainingError,
    build_engine,
    cross_entropy,
    load_checkpoint,
    save_checkpoint,
    train,
)

__all__ = [
    "Adam",
    "GradCheckReport",
    "GRUCell",
    "LearnableEngine",
    "MLP",
    "MultiHeadAttention",
    "NodeEncoder",
    "ParamStore",
    "TimeEncoder",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "build_engine",
    "concat",
    "cross_entropy",
    "finite_difference_check",
    "grad_enabled",
    "load_checkpoint",
    "log_softmax",
    "no_grad",
    "save_checkpoint",
    "softmax",
    "train",
]
