"""Numpy attention classifier: forward, exact backward, Adam, gradient check."""

from .adam import AdamState, adam_step, init_adam_state
from .gradcheck import GradCheckReport, ModeErrors, grad_check
from .model import (
    LN_EPS,
    PARAM_FIELDS,
    AllMasked,
    AttentionTrace,
    BatchInput,
    ForwardTrace,
    HyperParams,
    Mode,
    ModelParams,
    ShapeMismatch,
    attention_forward,
    backward,
    init_params,
    model_forward,
    predict,
    replay_forward,
    weighted_cross_entropy,
    zeros_like_params,
)
from .serialize import MODEL_MAGIC, MODEL_VERSION, load_model, model_to_bytes, save_model

__all__ = [
    "LN_EPS",
    "PARAM_FIELDS",
    "AllMasked",
    "AttentionTrace",
    "BatchInput",
    "ForwardTrace",
    "HyperParams",
    "Mode",
    "ModelParams",
    "ShapeMismatch",
    "attention_forward",
    "backward",
    "init_params",
    "model_forward",
    "predict",
    "replay_forward",
    "weighted_cross_entropy",
    "zeros_like_params",
    "AdamState",
    "adam_step",
    "init_adam_state",
    "GradCheckReport",
    "ModeErrors",
    "grad_check",
    "MODEL_MAGIC",
    "MODEL_VERSION",
    "save_model",
    "load_model",
    "model_to_bytes",
]
