"""Adam optimizer over :class:`~pausebench.neuralcore.model.ModelParams`.

Standard bias-corrected moment estimates:

    m <- beta1 * m + (1 - beta1) * g
    v <- beta2 * v + (1 - beta2) * g^2
    step = lr * (m / (1 - beta1^t)) / (sqrt(v / (1 - beta2^t)) + eps)

The update is functional: it returns new parameter and state containers
instead of mutating the inputs, which keeps checkpoint/restore trivial.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import PARAM_FIELDS, HyperParams, ModelParams, zeros_like_params

__all__ = ["AdamState", "init_adam_state", "adam_step"]


@dataclass(frozen=True)
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError("step counter must be non-negative")


def init_adam_state(params: ModelParams) -> AdamState:
    return AdamState(m=zeros_like_params(params), v=zeros_like_params(params), t=0)


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    hp: HyperParams,
) -> tuple[ModelParams, AdamState]:
    b1, b2, eps, lr = hp.adam_beta1, hp.adam_beta2, hp.adam_eps, hp.learning_rate
    t = state.t + 1
    new_params: dict[str, np.ndarray] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for name in PARAM_FIELDS:
        g = getattr(grads, name)
        m = b1 * getattr(state.m, name) + (1.0 - b1) * g
        v = b2 * getattr(state.v, name) + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_params[name] = getattr(params, name) - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return (
        replace(params, **new_params),
        AdamState(m=replace(state.m, **new_m), v=replace(state.v, **new_v), t=t),
    )
