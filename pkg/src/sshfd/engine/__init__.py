from .core import (
    AdamState,
    BatchNorm,
    Dropout,
    LayerSpec,
    Linear,
    MlpModel,
    ReLU,
    Tensor,
    TrainSchedule,
    adam_step,
    cross_entropy_loss,
    grad_check,
    lr_at,
    mse_loss,
    softmax,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "AdamState",
    "BatchNorm",
    "Dropout",
    "LayerSpec",
    "Linear",
    "MlpModel",
    "ReLU",
    "Tensor",
    "TrainSchedule",
    "adam_step",
    "cross_entropy_loss",
    "grad_check",
    "lr_at",
    "mse_loss",
    "softmax",
    "load_checkpoint",
    "save_checkpoint",
]
