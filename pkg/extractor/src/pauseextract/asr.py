"""Convert word-timestamped recognizer output into the transcript format.

The recognizer emits segments of words with start/end times and an optional
per-word disfluency flag. The classifier pipeline consumes a JSON transcript
document with ``subject_id``, ``test``, and ``segments[].words[]`` carrying
``text``/``start``/``end``/``disfluent`` fields; this module performs that
field mapping and nothing else — no recognition, no voice-activity detection.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

VALID_TESTS = ("VFT", "PDT")


class AsrDocumentError(ValueError):
    """Recognizer output document does not have the expected structure."""


class MissingTimestamps(AsrDocumentError):
    """A word lacks a usable start or end time."""


def _word_text(entry: Mapping[str, Any], where: str) -> str:
    for key in ("word", "text"):
        value = entry.get(key)
        if isinstance(value, str) and value.strip():
            return value.strip()
    raise AsrDocumentError(f"{where}: word entry has no text")


def _timestamp(entry: Mapping[str, Any], key: str, where: str) -> float:
    value = entry.get(key)
    if value is None or isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MissingTimestamps(f"{where}: missing or non-numeric {key!r} time")
    return float(value)


def ingest_asr(document: Any, subject_id: str, test: str) -> dict:
    """Map a recognizer output document onto a transcript document.

    ``document`` may be a JSON string or an already-parsed object with a
    ``segments`` list of ``{"words": [...]}`` groups; each word needs text
    plus ``start``/``end`` seconds and may carry ``disfluent`` (or
    ``disfluency``) as a boolean marker.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise AsrDocumentError(f"recognizer output is not valid JSON: {exc}") from exc
    if not isinstance(document, Mapping):
        raise AsrDocumentError("recognizer output must be a JSON object")
    if not subject_id or not isinstance(subject_id, str):
        raise AsrDocumentError("subject_id must be a non-empty string")
    if test not in VALID_TESTS:
        raise AsrDocumentError(f"test must be one of {VALID_TESTS}, got {test!r}")

    segments = document.get("segments")
    if not isinstance(segments, list) or not segments:
        raise AsrDocumentError("recognizer output has no segments")

    out_segments = []
    for s_idx, segment in enumerate(segments):
        if not isinstance(segment, Mapping):
            raise AsrDocumentError(f"segment {s_idx} must be an object")
        words = segment.get("words")
        if not isinstance(words, list) or not words:
            raise AsrDocumentError(f"segment {s_idx} has no words")
        out_words = []
        for w_idx, entry in enumerate(words):
            if not isinstance(entry, Mapping):
                raise AsrDocumentError(f"segment {s_idx} word {w_idx} must be an object")
            where = f"segment {s_idx} word {w_idx}"
            disfluent = bool(entry.get("disfluent", entry.get("disfluency", False)))
            out_words.append(
                {
                    "text": _word_text(entry, where),
                    "start": _timestamp(entry, "start", where),
                    "end": _timestamp(entry, "end", where),
                    "disfluent": disfluent,
                }
            )
        out_segments.append({"words": out_words})

    return {"subject_id": subject_id, "test": test, "segments": out_segments}


__all__ = ["VALID_TESTS", "AsrDocumentError", "MissingTimestamps", "ingest_asr"]
