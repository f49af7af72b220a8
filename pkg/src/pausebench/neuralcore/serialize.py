"""On-disk format for trained classifiers.

Layout (all integers little-endian unsigned 32-bit):

    bytes 0-3    magic "PEMM"
    bytes 4-7    version (currently 1)
    bytes 8-19   d_model, hidden_dim, n_classes
    bytes 20-23  metadata length M
    next M       UTF-8 JSON of the hyperparameters
    then         parameter tensors as raw float64 little-endian row-major,
                 concatenated in PARAM_FIELDS order

The reader validates magic, version, and exact payload size before
materializing any tensor.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from ..tensorio import BadMagic, IoFailure, TruncatedPayload, UnsupportedVersion
from .model import PARAM_FIELDS, HyperParams, ModelParams

__all__ = ["MODEL_MAGIC", "MODEL_VERSION", "save_model", "load_model", "model_to_bytes"]

MODEL_MAGIC = b"PEMM"
MODEL_VERSION = 1

_HEADER = struct.Struct("<4sIIIII")  # magic, version, d_model, hidden, classes, meta_len

_Source = Union[str, Path, BinaryIO]


def _param_shapes(d: int, h: int, c: int) -> dict[str, tuple[int, ...]]:
    return {
        "w_q": (d, d), "b_q": (d,), "w_k": (d, d), "b_k": (d,),
        "w_v": (d, d), "b_v": (d,), "w_o": (d, d), "b_o": (d,),
        "ln_gain": (d,), "ln_offset": (d,),
        "w_hidden": (d, h), "b_hidden": (h,),
        "w_out": (h, c), "b_out": (c,),
    }


def _hp_to_json(hp: HyperParams) -> bytes:
    doc = {
        "learning_rate": hp.learning_rate,
        "batch_size": hp.batch_size,
        "max_epochs": hp.max_epochs,
        "dropout_rate": hp.dropout_rate,
        "activation": hp.activation,
        "adam_beta1": hp.adam_beta1,
        "adam_beta2": hp.adam_beta2,
        "adam_eps": hp.adam_eps,
        "class_weights": list(hp.class_weights),
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def _hp_from_json(raw: bytes) -> HyperParams:
    try:
        doc = json.loads(raw.decode("utf-8"))
        return HyperParams(
            learning_rate=float(doc["learning_rate"]),
            batch_size=int(doc["batch_size"]),
            max_epochs=int(doc["max_epochs"]),
            dropout_rate=float(doc["dropout_rate"]),
            activation=str(doc["activation"]),
            adam_beta1=float(doc["adam_beta1"]),
            adam_beta2=float(doc["adam_beta2"]),
            adam_eps=float(doc["adam_eps"]),
            class_weights=tuple(float(w) for w in doc["class_weights"]),
        )
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise TruncatedPayload(f"model metadata is unreadable: {exc}") from exc


def save_model(target: _Source, params: ModelParams, hp: HyperParams) -> None:
    meta = _hp_to_json(hp)
    header = _HEADER.pack(
        MODEL_MAGIC, MODEL_VERSION,
        params.d_model, params.hidden_dim, params.n_classes, len(meta),
    )
    try:
        if isinstance(target, (str, Path)):
            with open(target, "wb") as fh:
                _write_body(fh, header, meta, params)
        else:
            _write_body(target, header, meta, params)
    except OSError as exc:
        raise IoFailure(f"cannot write model: {exc}") from exc


def _write_body(fh: BinaryIO, header: bytes, meta: bytes, params: ModelParams) -> None:
    fh.write(header)
    fh.write(meta)
    for name in PARAM_FIELDS:
        arr = np.ascontiguousarray(getattr(params, name), dtype="<f8")
        fh.write(arr.tobytes())


def load_model(source: _Source) -> tuple[ModelParams, HyperParams]:
    try:
        if isinstance(source, (str, Path)):
            with open(source, "rb") as fh:
                blob = fh.read()
        else:
            blob = source.read()
    except OSError as exc:
        raise IoFailure(f"cannot read model: {exc}") from exc

    if len(blob) < _HEADER.size:
        raise TruncatedPayload(f"model header needs {_HEADER.size} bytes, found {len(blob)}")
    magic, version, d, h, c, meta_len = _HEADER.unpack_from(blob)
    if magic != MODEL_MAGIC:
        raise BadMagic(f"expected magic {MODEL_MAGIC!r}, found {magic!r}")
    if version != MODEL_VERSION:
        raise UnsupportedVersion(f"unsupported model version {version}")
    if d < 1 or h < 1 or c < 1:
        raise TruncatedPayload("model dimensions must be positive")

    shapes = _param_shapes(d, h, c)
    tensor_bytes = sum(int(np.prod(s)) * 8 for s in shapes.values())
    expected = _HEADER.size + meta_len + tensor_bytes
    if len(blob) != expected:
        raise TruncatedPayload(f"model file holds {len(blob)} bytes, expected {expected}")

    meta = blob[_HEADER.size:_HEADER.size + meta_len]
    hp = _hp_from_json(meta)

    arrays: dict[str, np.ndarray] = {}
    offset = _HEADER.size + meta_len
    for name in PARAM_FIELDS:
        shape = shapes[name]
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        arrays[name] = arr.reshape(shape).astype(np.float64)
        offset += count * 8
    return ModelParams(**arrays), hp


def model_to_bytes(params: ModelParams, hp: HyperParams) -> bytes:
    buf = io.BytesIO()
    save_model(buf, params, hp)
    return buf.getvalue()
