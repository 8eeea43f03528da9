"""A small numpy CNN: conv / pool / dense layers with hand-written gradients."""

from .functional import (
    conv2d_backward,
    conv2d_forward,
    cross_entropy,
    dense_backward,
    dense_forward,
    maxpool2d_backward,
    maxpool2d_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy_grad,
)
from .model import (
    ArchConfig,
    CnnModel,
    LayerKind,
    LayerSpec,
    ModelFormatError,
    backward,
    build_model,
    default_specs,
    forward,
    load_model,
    model_from_bytes,
    model_to_bytes,
    save_model,
)
from .optim import AdamState, adam_init, adam_step
from .training import EpochStats, Prediction, TrainResult, accuracy, predict, predict_proba, train

__all__ = [
    "AdamState",
    "ArchConfig",
    "CnnModel",
    "EpochStats",
    "LayerKind",
    "LayerSpec",
    "ModelFormatError",
    "Prediction",
    "TrainResult",
    "accuracy",
    "adam_init",
    "adam_step",
    "backward",
    "build_model",
    "conv2d_backward",
    "conv2d_forward",
    "cross_entropy",
    "default_specs",
    "dense_backward",
    "dense_forward",
    "forward",
    "load_model",
    "maxpool2d_backward",
    "maxpool2d_forward",
    "model_from_bytes",
    "model_to_bytes",
    "predict",
    "predict_proba",
    "relu_backward",
    "relu_forward",
    "save_model",
    "softmax",
    "softmax_cross_entropy_grad",
    "train",
]
