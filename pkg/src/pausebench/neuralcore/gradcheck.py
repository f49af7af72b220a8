"""Finite-difference verification of the analytic backward pass.

Builds a tiny random model (few features, sequence length <= 4) for each
attention mode, computes analytic gradients, then compares every single
parameter coordinate against a central finite difference of the loss.
Dropout is exercised with a fixed pre-sampled mask so both sides of the
comparison see the same function.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import (
    PARAM_FIELDS,
    BatchInput,
    HyperParams,
    Mode,
    ModelParams,
    _forward_core,
    backward,
    init_params,
    weighted_cross_entropy,
)

__all__ = ["ModeErrors", "GradCheckReport", "grad_check"]

_CLASS_WEIGHTS = (1.25, 0.8)


@dataclass(frozen=True)
class ModeErrors:
    mode: str
    max_relative_error: float
    worst_field: str


@dataclass(frozen=True)
class GradCheckReport:
    seed: int
    step: float
    tolerance: float
    per_mode: tuple[ModeErrors, ...]
    max_relative_error: float
    passed: bool


def _relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-6)
    return abs(analytic - numeric) / denom


def _make_batch(rng: np.random.Generator, mode: Mode, d_model: int) -> BatchInput:
    b, lq, lk = 3, 4, 3 if mode is Mode.CROSS else 4
    query = rng.normal(size=(b, lq, d_model))
    query_mask = np.ones((b, lq), dtype=bool)
    query_mask[0, -1] = False  # one padded query position
    query[~query_mask] = 0.0
    if mode is Mode.CROSS:
        kv = rng.normal(size=(b, lk, d_model))
        kv_mask = np.ones((b, lk), dtype=bool)
        kv_mask[1, -1] = False  # one padded key position
        kv[~kv_mask] = 0.0
    else:
        kv, kv_mask = query, query_mask
    labels = rng.integers(0, 2, size=b)
    return BatchInput(query=query, query_mask=query_mask, kv=kv, kv_mask=kv_mask, labels=labels)


def grad_check(
    seed: int = 7,
    *,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    d_model: int = 8,
    hidden_dim: int = 5,
    corrupt: bool = False,
) -> GradCheckReport:
    """Compare analytic gradients to central finite differences.

    ``corrupt=True`` injects a deliberate error into one analytic gradient
    entry; the report must then fail — this keeps the checker honest.
    """
    per_mode: list[ModeErrors] = []
    for mode_index, mode in enumerate(Mode):
        rng = np.random.default_rng([seed, mode_index])
        params = init_params(rng, d_model=d_model, hidden_dim=hidden_dim)
        hp = HyperParams(class_weights=_CLASS_WEIGHTS)
        batch = _make_batch(rng, mode, d_model)
        keep = 1.0 - hp.dropout_rate
        dropout_mask = (rng.random((batch.size, d_model)) < keep).astype(np.float64) / keep

        def loss_at(p: ModelParams) -> float:
            trace = _forward_core(p, hp, batch, mode, training=True, dropout_mask=dropout_mask)
            loss, _ = weighted_cross_entropy(trace.logits, batch.labels, hp.class_weights)
            return loss

        trace = _forward_core(params, hp, batch, mode, training=True, dropout_mask=dropout_mask)
        _, dlogits = weighted_cross_entropy(trace.logits, batch.labels, hp.class_weights)
        grads = backward(trace, dlogits)
        if corrupt and mode_index == 0:
            bad = grads.w_hidden.copy()
            bad[0, 0] += 1.0
            grads = replace(grads, w_hidden=bad)

        worst = 0.0
        worst_field = PARAM_FIELDS[0]
        for name in PARAM_FIELDS:
            base = getattr(params, name)
            analytic = getattr(grads, name)
            for idx in np.ndindex(base.shape):
                plus = base.copy()
                plus[idx] += step
                minus = base.copy()
                minus[idx] -= step
                numeric = (
                    loss_at(replace(params, **{name: plus}))
                    - loss_at(replace(params, **{name: minus}))
                ) / (2.0 * step)
                err = _relative_error(float(analytic[idx]), numeric)
                if err > worst:
                    worst, worst_field = err, name
        per_mode.append(ModeErrors(mode=mode.value, max_relative_error=worst, worst_field=worst_field))

    overall = max(m.max_relative_error for m in per_mode)
    return GradCheckReport(
        seed=seed,
        step=step,
        tolerance=tolerance,
        per_mode=tuple(per_mode),
        max_relative_error=overall,
        passed=overall < tolerance,
    )
