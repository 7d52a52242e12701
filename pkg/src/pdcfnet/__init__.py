"""Underwater image enhancement with pixel difference convolutions and cross-level fusion."""

from .autograd import Tensor, grad_check, no_grad
from .losses import LossConfig, total_loss
from .network import NetworkConfig, PDCFNet, model_stats
from .pdc import PdcKind, kernel_transform, pdc_conv

__all__ = [
    "Tensor",
    "grad_check",
    "no_grad",
    "LossConfig",
    "total_loss",
    "NetworkConfig",
    "PDCFNet",
    "model_stats",
    "PdcKind",
    "kernel_transform",
    "pdc_conv",
]

__version__ = "0.1.0"
