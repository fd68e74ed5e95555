"""Dense float64 layers with hand-written reverse-mode gradients."""

from pose_pipeline.nn.gradcheck import GradCheckReport, grad_check
from pose_pipeline.nn.layers import (
    BatchNorm1d,
    Dropout,
    Linear,
    Module,
    Parameter,
    ReLU,
    ResidualBlock,
    Sequential,
    check_finite,
)
from pose_pipeline.nn.losses import smooth_l1
from pose_pipeline.nn.optim import Adam

__all__ = [
    "Adam",
    "BatchNorm1d",
    "Dropout",
    "GradCheckReport",
    "Linear",
    "Module",
    "Parameter",
    "ReLU",
    "ResidualBlock",
    "Sequential",
    "check_finite",
    "grad_check",
    "smooth_l1",
]
