"""Binary embedding-matrix files and cohort manifests.

The ``.pemb`` file is the frozen interchange format between embedding
extraction and training: a 16-byte header (magic ``PEMB``, version, row
count, column count, all little-endian u32) followed by the row-major
float32 payload.  Writes are byte-identical across platforms for identical
matrices; reads validate the header and the exact payload size before
touching the data, so an inflated row count in a corrupt header fails
cleanly instead of allocating.

The cohort manifest is a UTF-8 JSON document binding subjects to labels,
tests, and matrix files.  Relative paths are resolved against the manifest
location.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .enrichment import SchemeId, TestType

__all__ = [
    "EMBED_DIM",
    "MATRIX_MAGIC",
    "MATRIX_VERSION",
    "IoFailure",
    "MatrixError",
    "BadMagic",
    "UnsupportedVersion",
    "TruncatedPayload",
    "DimensionMismatch",
    "ManifestError",
    "MalformedManifest",
    "DanglingPath",
    "DuplicateSubject",
    "Label",
    "EmbeddingMatrix",
    "SampleRecord",
    "CohortManifest",
    "write_matrix",
    "read_matrix",
    "read_matrix_header",
    "load_manifest",
    "write_manifest",
]

EMBED_DIM = 768
MATRIX_MAGIC = b"PEMB"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIII")  # magic, version, rows, cols


class IoFailure(OSError):
    """A matrix file could not be written."""


class MatrixError(ValueError):
    """A matrix file violates the format contract."""


class BadMagic(MatrixError):
    pass


class UnsupportedVersion(MatrixError):
    pass


class TruncatedPayload(MatrixError):
    """Payload size disagrees with the header (short file or trailing bytes)."""


class DimensionMismatch(MatrixError):
    """Row/column counts violate the matrix contract (cols must be 768)."""


class ManifestError(ValueError):
    pass


class MalformedManifest(ManifestError):
    pass


class DanglingPath(ManifestError):
    pass


class DuplicateSubject(ManifestError):
    pass


class Label(str, Enum):
    """Cognitive-status group of a subject."""

    NC = "NC"
    MCI = "MCI"
    AD = "AD"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """rows x 768 float32 matrix, one row per token or per time window."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise DimensionMismatch(f"matrix must be 2-D, got shape {arr.shape}")
        rows, cols = arr.shape
        if cols != EMBED_DIM:
            raise DimensionMismatch(f"matrix must have {EMBED_DIM} columns, got {cols}")
        if rows < 1:
            raise DimensionMismatch("matrix must have at least one row")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]


Pathish = Union[str, Path]


def write_matrix(m: EmbeddingMatrix, destination: Pathish) -> None:
    """Write ``m`` to a ``.pemb`` file (header + little-endian f32 payload)."""
    header = _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, m.rows, m.cols)
    payload = np.ascontiguousarray(m.data, dtype="<f4").tobytes()
    try:
        with open(destination, "wb") as f:
            f.write(header)
            f.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write matrix to {destination}: {exc}") from exc


def _read_header(f, size: int, source) -> tuple[int, int]:
    raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"{source}: file too short for a header")
    magic, version, rows, cols = _HEADER.unpack(raw)
    if magic != MATRIX_MAGIC:
        raise BadMagic(f"{source}: bad magic {magic!r}")
    if version != MATRIX_VERSION:
        raise UnsupportedVersion(f"{source}: unsupported version {version}")
    if cols != EMBED_DIM:
        raise DimensionMismatch(f"{source}: expected {EMBED_DIM} columns, got {cols}")
    if rows < 1:
        raise DimensionMismatch(f"{source}: row count must be >= 1, got {rows}")
    expected = _HEADER.size + rows * cols * 4
    if size != expected:
        raise TruncatedPayload(
            f"{source}: header promises {expected} bytes, file holds {size}"
        )
    return rows, cols


def read_matrix_header(source: Pathish) -> tuple[int, int]:
    """Validate header and payload size without loading the payload."""
    try:
        size = os.stat(source).st_size
        with open(source, "rb") as f:
            return _read_header(f, size, source)
    except OSError as exc:
        raise IoFailure(f"cannot read matrix from {source}: {exc}") from exc


def read_matrix(source: Pathish) -> EmbeddingMatrix:
    """Read and validate a ``.pemb`` file."""
    try:
        size = os.stat(source).st_size
        with open(source, "rb") as f:
            rows, cols = _read_header(f, size, source)
            payload = f.read(rows * cols * 4)
    except OSError as exc:
        raise IoFailure(f"cannot read matrix from {source}: {exc}") from exc
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    return EmbeddingMatrix(data)


# --- cohort manifest ---------------------------------------------------------

@dataclass(frozen=True)
class SampleRecord:
    """One subject's entry: label, test, and paths to its artifact files.

    Paths are absolute after :func:`load_manifest`.
    """

    subject_id: str
    label: Label
    test: TestType
    text_matrix_path: Path
    audio_matrix_path: Optional[Path] = None
    enriched_transcript_path: Optional[Path] = None


@dataclass(frozen=True)
class CohortManifest:
    schema_version: int
    scheme_id: SchemeId
    records: tuple[SampleRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise MalformedManifest("manifest holds no records")

    def labels(self) -> set[Label]:
        return {r.label for r in self.records}


def _record_from_json(obj: dict, index: int, root: Path, check_files: bool) -> SampleRecord:
    ctx = f"record {index}"
    if not isinstance(obj, dict):
        raise MalformedManifest(f"{ctx}: expected an object")
    try:
        subject_id = obj["subject_id"]
        label = Label(obj["label"])
        test = TestType(obj["test"])
        text_path = obj["text_matrix_path"]
    except KeyError as exc:
        raise MalformedManifest(f"{ctx}: missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise MalformedManifest(f"{ctx}: {exc}") from None
    if not isinstance(subject_id, str) or not subject_id:
        raise MalformedManifest(f"{ctx}: subject_id must be a non-empty string")

    def resolve(value, field_name: str, validate_matrix: bool) -> Optional[Path]:
        if value is None:
            return None
        if not isinstance(value, str) or not value:
            raise MalformedManifest(f"{ctx}: {field_name} must be a non-empty string")
        path = (root / value).resolve()
        if check_files:
            if not path.is_file():
                raise DanglingPath(f"{ctx} ({subject_id}): {field_name} {value!r} not found")
            if validate_matrix:
                read_matrix_header(path)
        return path

    return SampleRecord(
        subject_id=subject_id,
        label=label,
        test=test,
        text_matrix_path=resolve(text_path, "text_matrix_path", True),
        audio_matrix_path=resolve(obj.get("audio_matrix_path"), "audio_matrix_path", True),
        enriched_transcript_path=resolve(
            obj.get("enriched_transcript_path"), "enriched_transcript_path", False
        ),
    )


def load_manifest(source: Pathish, check_files: bool = True) -> CohortManifest:
    """Load and validate a cohort manifest.

    Referenced matrix files must exist and carry a valid header; audio and
    enriched-transcript paths are optional per record.
    """
    source = Path(source)
    try:
        doc = json.loads(source.read_text("utf-8"))
    except OSError as exc:
        raise MalformedManifest(f"cannot read manifest {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{source}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedManifest(f"{source}: top-level value must be an object")
    version = doc.get("schema_version")
    if version != 1:
        raise MalformedManifest(f"{source}: unsupported schema_version {version!r}")
    try:
        scheme_id = SchemeId(doc.get("scheme"))
    except ValueError:
        raise MalformedManifest(f"{source}: unknown scheme {doc.get('scheme')!r}") from None
    records_raw = doc.get("records")
    if not isinstance(records_raw, list) or not records_raw:
        raise MalformedManifest(f"{source}: records must be a non-empty array")

    root = source.resolve().parent
    records = [
        _record_from_json(obj, i, root, check_files) for i, obj in enumerate(records_raw)
    ]
    seen: set[str] = set()
    for r in records:
        if r.subject_id in seen:
            raise DuplicateSubject(f"subject_id {r.subject_id!r} appears twice")
        seen.add(r.subject_id)
    return CohortManifest(schema_version=1, scheme_id=scheme_id, records=tuple(records))


def write_manifest(manifest: CohortManifest, destination: Pathish) -> None:
    """Write a manifest with paths relative to its own directory."""
    destination = Path(destination)
    root = destination.resolve().parent

    def rel(path: Optional[Path]) -> Optional[str]:
        if path is None:
            return None
        return os.path.relpath(Path(path).resolve(), root)

    doc = {
        "schema_version": manifest.schema_version,
        "scheme": manifest.scheme_id.value,
        "records": [
            {
                "subject_id": r.subject_id,
                "label": r.label.value,
                "test": r.test.value,
                "text_matrix_path": rel(r.text_matrix_path),
                **(
                    {"audio_matrix_path": rel(r.audio_matrix_path)}
                    if r.audio_matrix_path is not None
                    else {}
                ),
                **(
                    {"enriched_transcript_path": rel(r.enriched_transcript_path)}
                    if r.enriched_transcript_path is not None
                    else {}
                ),
            }
            for r in manifest.records
        ],
    }
    destination.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", "utf-8")
