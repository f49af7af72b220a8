"""Single-head attention classifier with exact reverse-mode gradients.

The pipeline is: learned query/key/value projections, scaled dot-product
attention with masked softmax, output projection, masked mean pooling over
query positions, layer normalization, dropout (training only), and a
one-hidden-layer MLP with rectifier activation ending in two logits.

Everything is computed in float64 numpy; inputs from the float32 file
format are upcast on batch construction.  The forward pass caches every
intermediate needed for an exact hand-derived backward pass, which is
verified against central finite differences (see :mod:`.gradcheck`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "LN_EPS",
    "ShapeMismatch",
    "AllMasked",
    "Mode",
    "HyperParams",
    "ModelParams",
    "PARAM_FIELDS",
    "BatchInput",
    "AttentionTrace",
    "ForwardTrace",
    "init_params",
    "zeros_like_params",
    "attention_forward",
    "model_forward",
    "replay_forward",
    "predict",
    "weighted_cross_entropy",
    "backward",
]

LN_EPS = 1e-5


class ShapeMismatch(ValueError):
    pass


class AllMasked(ValueError):
    """A sample's mask leaves no valid position."""


class Mode(str, Enum):
    """What feeds the attention module.

    Self modes use one modality as query, key, and value; cross mode uses
    text as query and audio as key and value, so the output length follows
    the text sequence.
    """

    SELF_TEXT = "self_text"
    SELF_AUDIO = "self_audio"
    CROSS = "cross"


@dataclass(frozen=True)
class HyperParams:
    """Fixed training setting (no tuning)."""

    learning_rate: float = 5e-5
    batch_size: int = 8
    max_epochs: int = 20
    dropout_rate: float = 0.1
    activation: str = "relu"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    class_weights: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate < 1:
            raise ValueError(f"learning_rate must be in (0,1), got {self.learning_rate}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError(f"dropout_rate must be in [0,1), got {self.dropout_rate}")
        for name in ("adam_beta1", "adam_beta2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must be in (0,1), got {v}")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be >= 1")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if any(w <= 0 for w in self.class_weights):
            raise ValueError("class weights must be positive")


PARAM_FIELDS = (
    "w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o",
    "ln_gain", "ln_offset", "w_hidden", "b_hidden", "w_out", "b_out",
)


@dataclass(frozen=True)
class ModelParams:
    """All trainable tensors.

    The same container also carries gradients and Adam moments, which share
    these shapes.  Production shapes are d_model=768, hidden_dim=512,
    n_classes=2; smaller models are used for gradient checking.
    """

    w_q: np.ndarray
    b_q: np.ndarray
    w_k: np.ndarray
    b_k: np.ndarray
    w_v: np.ndarray
    b_v: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    ln_gain: np.ndarray
    ln_offset: np.ndarray
    w_hidden: np.ndarray
    b_hidden: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self) -> None:
        d = self.w_q.shape[0]
        h = self.w_hidden.shape[1]
        c = self.w_out.shape[1]
        expected = {
            "w_q": (d, d), "b_q": (d,), "w_k": (d, d), "b_k": (d,),
            "w_v": (d, d), "b_v": (d,), "w_o": (d, d), "b_o": (d,),
            "ln_gain": (d,), "ln_offset": (d,),
            "w_hidden": (d, h), "b_hidden": (h,),
            "w_out": (h, c), "b_out": (c,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_hidden.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[1]

    def copy(self) -> "ModelParams":
        return replace(self, **{f: getattr(self, f).copy() for f in PARAM_FIELDS})


def init_params(
    rng: np.random.Generator, d_model: int = 768, hidden_dim: int = 512, n_classes: int = 2
) -> ModelParams:
    """Variance-preserving uniform init for weights, zeros for biases."""

    def xavier(fan_in: int, fan_out: int) -> np.ndarray:
        a = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, size=(fan_in, fan_out))

    d, h, c = d_model, hidden_dim, n_classes
    return ModelParams(
        w_q=xavier(d, d), b_q=np.zeros(d),
        w_k=xavier(d, d), b_k=np.zeros(d),
        w_v=xavier(d, d), b_v=np.zeros(d),
        w_o=xavier(d, d), b_o=np.zeros(d),
        ln_gain=np.ones(d), ln_offset=np.zeros(d),
        w_hidden=xavier(d, h), b_hidden=np.zeros(h),
        w_out=xavier(h, c), b_out=np.zeros(c),
    )


def zeros_like_params(params: ModelParams) -> ModelParams:
    return replace(
        params, **{f: np.zeros_like(getattr(params, f)) for f in PARAM_FIELDS}
    )


@dataclass(frozen=True)
class BatchInput:
    """Padded sequences with validity masks and binary labels.

    ``kv`` is the same array as ``query`` in self modes and the audio
    sequences (own mask) in cross mode.
    """

    query: np.ndarray      # (B, Lq, d) float64, zero padded
    query_mask: np.ndarray  # (B, Lq) bool
    kv: np.ndarray         # (B, Lk, d)
    kv_mask: np.ndarray    # (B, Lk) bool
    labels: np.ndarray     # (B,) int, 0 or 1

    def __post_init__(self) -> None:
        q = np.asarray(self.query, dtype=np.float64)
        kv = q if self.kv is self.query else np.asarray(self.kv, dtype=np.float64)
        qm = np.asarray(self.query_mask, dtype=bool)
        km = np.asarray(self.kv_mask, dtype=bool)
        y = np.asarray(self.labels, dtype=np.int64)
        if q.ndim != 3 or kv.ndim != 3:
            raise ShapeMismatch("sequences must be 3-D (batch, positions, features)")
        if q.shape[2] != kv.shape[2]:
            raise ShapeMismatch("query and key/value feature dimensions differ")
        if qm.shape != q.shape[:2] or km.shape != kv.shape[:2]:
            raise ShapeMismatch("mask shapes do not match their sequences")
        if q.shape[0] != kv.shape[0] or y.shape != (q.shape[0],):
            raise ShapeMismatch("batch dimensions do not line up")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if not (qm.any(axis=1).all() and km.any(axis=1).all()):
            raise AllMasked("every sample needs at least one valid position per mask")
        object.__setattr__(self, "query", q)
        object.__setattr__(self, "kv", kv)
        object.__setattr__(self, "query_mask", qm)
        object.__setattr__(self, "kv_mask", km)
        object.__setattr__(self, "labels", y)

    @property
    def size(self) -> int:
        return self.query.shape[0]


@dataclass
class AttentionTrace:
    query: np.ndarray
    keyvalue: np.ndarray
    key_mask: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    weights: np.ndarray  # (B, Lq, Lk); masked keys carry exactly 0
    mix: np.ndarray      # weights @ v, before the output projection
    context: np.ndarray  # (B, Lq, d)


@dataclass
class ForwardTrace:
    """Everything the backward pass needs, plus the forward logits."""

    params: ModelParams
    hp: HyperParams
    batch: BatchInput
    mode: Mode
    training: bool
    attention: AttentionTrace
    n_valid: np.ndarray      # (B,) valid query positions
    pooled: np.ndarray       # (B, d)
    x_hat: np.ndarray        # layer-norm normalized input
    inv_std: np.ndarray      # (B, 1)
    ln_out: np.ndarray
    dropout_mask: Optional[np.ndarray]  # scaled inverted-dropout mask or None
    dropped: np.ndarray
    h_pre: np.ndarray
    h: np.ndarray
    logits: np.ndarray


def _project(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    batch, length, d = x.shape
    return (x.reshape(batch * length, d) @ w).reshape(batch, length, -1) + b


def attention_forward(
    params: ModelParams,
    query: np.ndarray,
    key: np.ndarray,
    value: np.ndarray,
    key_mask: np.ndarray,
) -> tuple[np.ndarray, AttentionTrace]:
    """Scaled dot-product attention with learned projections.

    Softmax rows are normalized over unmasked key positions only; masked
    keys receive exactly zero weight.  Output length equals query length.
    """
    query = np.asarray(query, dtype=np.float64)
    key = np.asarray(key, dtype=np.float64)
    value = np.asarray(value, dtype=np.float64)
    key_mask = np.asarray(key_mask, dtype=bool)
    if key is not value and key.shape != value.shape:
        raise ShapeMismatch("key and value must share a shape")
    if query.ndim != 3 or key.ndim != 3:
        raise ShapeMismatch("attention inputs must be 3-D")
    d = params.d_model
    if query.shape[2] != d or key.shape[2] != d:
        raise ShapeMismatch(f"feature dimension must be {d}")
    if key_mask.shape != key.shape[:2]:
        raise ShapeMismatch("key mask shape does not match keys")
    if not key_mask.any(axis=1).all():
        raise AllMasked("a sample's key mask is empty")

    q = _project(query, params.w_q, params.b_q)
    k = _project(key, params.w_k, params.b_k)
    v = _project(value, params.w_v, params.b_v)
    scale = 1.0 / math.sqrt(d)
    scores = np.matmul(q, k.transpose(0, 2, 1)) * scale
    scores = np.where(key_mask[:, None, :], scores, -np.inf)
    scores -= scores.max(axis=2, keepdims=True)
    e = np.exp(scores)  # exp(-inf) is exactly 0 at masked keys
    weights = e / e.sum(axis=2, keepdims=True)
    mix = np.matmul(weights, v)
    context = _project(mix, params.w_o, params.b_o)
    trace = AttentionTrace(
        query=query, keyvalue=key, key_mask=key_mask,
        q=q, k=k, v=v, weights=weights, mix=mix, context=context,
    )
    return context, trace


def _forward_core(
    params: ModelParams,
    hp: HyperParams,
    batch: BatchInput,
    mode: Mode,
    training: bool,
    dropout_mask: Optional[np.ndarray],
) -> ForwardTrace:
    if batch.query.shape[2] != params.d_model:
        raise ShapeMismatch(
            f"batch feature dimension {batch.query.shape[2]} != model {params.d_model}"
        )
    context, att = attention_forward(params, batch.query, batch.kv, batch.kv, batch.kv_mask)

    qm = batch.query_mask.astype(np.float64)
    n_valid = qm.sum(axis=1)
    pooled = (context * qm[:, :, None]).sum(axis=1) / n_valid[:, None]

    mu = pooled.mean(axis=1, keepdims=True)
    centered = pooled - mu
    var = (centered ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    x_hat = centered * inv_std
    ln_out = x_hat * params.ln_gain + params.ln_offset

    dropped = ln_out if dropout_mask is None else ln_out * dropout_mask

    h_pre = dropped @ params.w_hidden + params.b_hidden
    h = np.maximum(h_pre, 0.0)
    logits = h @ params.w_out + params.b_out

    return ForwardTrace(
        params=params, hp=hp, batch=batch, mode=mode, training=training,
        attention=att, n_valid=n_valid, pooled=pooled, x_hat=x_hat,
        inv_std=inv_std, ln_out=ln_out, dropout_mask=dropout_mask,
        dropped=dropped, h_pre=h_pre, h=h, logits=logits,
    )


def model_forward(
    params: ModelParams,
    hp: HyperParams,
    batch: BatchInput,
    mode: Mode,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Full classifier forward pass; returns one 2-logit row per sample.

    Dropout fires only with ``training=True`` (requires ``rng``); inference
    is deterministic.
    """
    dropout_mask = None
    if training and hp.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training forward pass with dropout needs an rng")
        keep = 1.0 - hp.dropout_rate
        shape = (batch.size, params.d_model)
        dropout_mask = (rng.random(shape) < keep).astype(np.float64) / keep
    trace = _forward_core(params, hp, batch, mode, training, dropout_mask)
    return trace.logits, trace


def replay_forward(trace: ForwardTrace) -> np.ndarray:
    """Recompute the logits from the trace's inputs (same dropout mask)."""
    redone = _forward_core(
        trace.params, trace.hp, trace.batch, trace.mode, trace.training, trace.dropout_mask
    )
    return redone.logits


def predict(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Softmax probabilities and argmax class (ties break toward class 0)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)
    classes = np.argmax(logits, axis=-1)
    return probs, classes


def weighted_cross_entropy(
    logits: np.ndarray, labels: np.ndarray, class_weights
) -> tuple[float, np.ndarray]:
    """Class-rescaled cross entropy and its exact gradient.

    loss = sum_i w_{y_i} * (-log softmax(logits_i)[y_i]) / sum_i w_{y_i}
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    weights = np.asarray(class_weights, dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("class weights must be positive")
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatch("logits must be (batch, classes), labels (batch,)")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z

    n = logits.shape[0]
    w = weights[labels]
    w_total = w.sum()
    loss = float(-(w * log_probs[np.arange(n), labels]).sum() / w_total)

    probs = np.exp(log_probs)
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    grad *= (w / w_total)[:, None]
    return loss, grad


def backward(trace: ForwardTrace, dlogits: np.ndarray) -> ModelParams:
    """Exact gradients of the loss w.r.t. every parameter tensor."""
    p = trace.params
    batch = trace.batch
    att = trace.attention
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != trace.logits.shape:
        raise ShapeMismatch("upstream gradient shape does not match logits")

    # MLP
    d_w_out = trace.h.T @ dlogits
    d_b_out = dlogits.sum(axis=0)
    dh = dlogits @ p.w_out.T
    dh_pre = dh * (trace.h_pre > 0.0)
    d_w_hidden = trace.dropped.T @ dh_pre
    d_b_hidden = dh_pre.sum(axis=0)
    d_dropped = dh_pre @ p.w_hidden.T

    # dropout
    d_ln_out = d_dropped if trace.dropout_mask is None else d_dropped * trace.dropout_mask

    # layer norm
    d_gain = (d_ln_out * trace.x_hat).sum(axis=0)
    d_offset = d_ln_out.sum(axis=0)
    dx_hat = d_ln_out * p.ln_gain
    n_feat = trace.pooled.shape[1]
    s1 = dx_hat.sum(axis=1, keepdims=True)
    s2 = (dx_hat * trace.x_hat).sum(axis=1, keepdims=True)
    d_pooled = trace.inv_std * (dx_hat - s1 / n_feat - trace.x_hat * s2 / n_feat)

    # masked mean pooling
    qm = batch.query_mask.astype(np.float64)
    d_context = qm[:, :, None] * (d_pooled[:, None, :] / trace.n_valid[:, None, None])

    # attention output projection
    b, lq, d = d_context.shape
    mix_flat = att.mix.reshape(b * lq, d)
    d_context_flat = d_context.reshape(b * lq, d)
    d_w_o = mix_flat.T @ d_context_flat
    d_b_o = d_context_flat.sum(axis=0)
    d_mix = d_context_flat @ p.w_o.T
    d_mix = d_mix.reshape(b, lq, d)

    # attention mix and softmax
    d_weights = np.matmul(d_mix, att.v.transpose(0, 2, 1))
    d_v = np.matmul(att.weights.transpose(0, 2, 1), d_mix)
    inner = (d_weights * att.weights).sum(axis=2, keepdims=True)
    d_scores = att.weights * (d_weights - inner)
    d_scores *= 1.0 / math.sqrt(d)
    d_q = np.matmul(d_scores, att.k)
    d_k = np.matmul(d_scores.transpose(0, 2, 1), att.q)

    # input projections
    lk = att.keyvalue.shape[1]
    query_flat = att.query.reshape(b * lq, d)
    kv_flat = att.keyvalue.reshape(b * lk, d)
    d_w_q = query_flat.T @ d_q.reshape(b * lq, d)
    d_b_q = d_q.sum(axis=(0, 1))
    d_w_k = kv_flat.T @ d_k.reshape(b * lk, d)
    d_b_k = d_k.sum(axis=(0, 1))
    d_w_v = kv_flat.T @ d_v.reshape(b * lk, d)
    d_b_v = d_v.sum(axis=(0, 1))

    return ModelParams(
        w_q=d_w_q, b_q=d_b_q, w_k=d_w_k, b_k=d_b_k, w_v=d_w_v, b_v=d_b_v,
        w_o=d_w_o, b_o=d_b_o, ln_gain=d_gain, ln_offset=d_offset,
        w_hidden=d_w_hidden, b_hidden=d_b_hidden, w_out=d_w_out, b_out=d_b_out,
    )
