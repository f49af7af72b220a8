"""Writer for the ``.pemb`` embedding-matrix interchange format.

Layout: 16-byte header — magic ``PEMB``, format version ``1``, row count,
column count, all little-endian unsigned 32-bit — followed by the matrix as
row-major little-endian float32. Columns are always 768. The consumer side
has its own independent reader; this module only needs to produce
byte-correct files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

MATRIX_MAGIC = b"PEMB"
MATRIX_VERSION = 1
EMBED_DIM = 768

_HEADER = struct.Struct("<4sIII")

Pathish = Union[str, Path]


class MatrixShapeError(ValueError):
    """Matrix does not satisfy the interchange contract (2-D, 768 cols, >= 1 row)."""


class IoFailure(OSError):
    """Underlying file write failed."""


def matrix_to_bytes(data: np.ndarray) -> bytes:
    """Serialize ``data`` without touching the filesystem."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise MatrixShapeError(f"matrix must be 2-D, got shape {arr.shape}")
    rows, cols = arr.shape
    if cols != EMBED_DIM:
        raise MatrixShapeError(f"matrix must have {EMBED_DIM} columns, got {cols}")
    if rows < 1:
        raise MatrixShapeError("matrix must have at least one row")
    if not np.all(np.isfinite(arr)):
        raise MatrixShapeError("matrix contains non-finite values")
    return _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, rows, cols) + arr.tobytes()


def write_matrix(data: np.ndarray, destination: Pathish) -> None:
    """Validate ``data`` and write it as a ``.pemb`` file."""
    payload = matrix_to_bytes(data)
    try:
        Path(destination).write_bytes(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write matrix to {destination}: {exc}") from exc


def _checked(data: np.ndarray, what: str) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[1] != EMBED_DIM or arr.shape[0] < 1:
        raise MatrixShapeError(
            f"{what} matrix must be (rows >= 1) x {EMBED_DIM}, got shape {arr.shape}"
        )
    return arr


@dataclass(frozen=True)
class ExtractionRecord:
    """One subject's produced matrices: per-token text, per-window audio."""

    subject_id: str
    text_matrix: np.ndarray
    audio_matrix: np.ndarray

    def __post_init__(self) -> None:
        if not self.subject_id or not isinstance(self.subject_id, str):
            raise ValueError("subject_id must be a non-empty string")
        object.__setattr__(self, "text_matrix", _checked(self.text_matrix, "text"))
        object.__setattr__(self, "audio_matrix", _checked(self.audio_matrix, "audio"))


__all__ = [
    "EMBED_DIM",
    "MATRIX_MAGIC",
    "MATRIX_VERSION",
    "ExtractionRecord",
    "MatrixShapeError",
    "IoFailure",
    "matrix_to_bytes",
    "write_matrix",
]
