"""Pause-enriched transcripts.

Takes word-timestamped transcripts (one subject, one cognitive test, a list
of voice-activity segments holding timed words), computes the silent gap
between every pair of consecutive words, and interleaves special pause
tokens into the word sequence according to a binning scheme.  Four schemes
are supported (P1, P2, P3, P4) plus a P3 variant that additionally surfaces
the ASR's disfluency marker ``[*]``.

All values here are immutable after construction and all operations are
pure functions, so transcripts can be processed in parallel across subjects
without synchronization.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Optional, Sequence, Union

__all__ = [
    "TranscriptError",
    "MalformedDocument",
    "InvalidTiming",
    "EmptyTranscript",
    "TestType",
    "WordToken",
    "Segment",
    "TimedTranscript",
    "PauseBin",
    "PauseScheme",
    "SchemeId",
    "scheme_id_from_string",
    "PauseEvent",
    "ItemKind",
    "TranscriptItem",
    "EnrichedTranscript",
    "PAUSE_SCHEMES",
    "DISFLUENCY_TOKEN",
    "RESERVED_TOKENS",
    "NEGATIVE_GAP_TOLERANCE_S",
    "parse_timed_transcript",
    "transcript_to_document",
    "extract_pauses",
    "bin_pause",
    "enrich",
    "render",
]

# ASR word alignments jitter by a few milliseconds; treat overlaps up to
# this size as a zero-length pause instead of rejecting the transcript.
NEGATIVE_GAP_TOLERANCE_S = 0.05

DISFLUENCY_TOKEN = "[*]"


class TranscriptError(ValueError):
    """Base class for transcript validation failures."""


class MalformedDocument(TranscriptError):
    """The document is syntactically broken or violates the field contract."""


class InvalidTiming(TranscriptError):
    """Word timings are inconsistent (end before start, overlapping words)."""


class EmptyTranscript(TranscriptError):
    """The transcript contains no words."""


class TestType(str, Enum):
    """Cognitive test the speech sample comes from."""

    VFT = "VFT"  # verbal fluency: name animals for one minute
    PDT = "PDT"  # picture description: describe a mountain scene


class SchemeId(str, Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P3_DISFL = "P3_DISFL"


def scheme_id_from_string(value: str) -> SchemeId:
    """Parse a scheme name, accepting flag spellings like "p3-disfl"."""
    try:
        return SchemeId(value.strip().upper().replace("-", "_"))
    except ValueError:
        names = ", ".join(s.value.lower().replace("_", "-") for s in SchemeId)
        raise MalformedDocument(f"unknown pause scheme {value!r} (expected one of {names})")


@dataclass(frozen=True)
class WordToken:
    """One recognized word with its start/end time in seconds.

    ``disfluent`` carries the ASR's potential-disfluency annotation for
    this word.
    """

    text: str
    start_s: float
    end_s: float
    disfluent: bool = False

    def __post_init__(self) -> None:
        if not self.text:
            raise MalformedDocument("word text must be non-empty")
        if any(c.isspace() for c in self.text):
            raise MalformedDocument(f"word text contains whitespace: {self.text!r}")
        if self.text in RESERVED_TOKENS:
            raise MalformedDocument(f"word text collides with a reserved token: {self.text!r}")
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise InvalidTiming(f"non-finite time on word {self.text!r}")
        if self.start_s < 0:
            raise InvalidTiming(f"word {self.text!r} starts before 0 ({self.start_s})")
        if self.end_s < self.start_s:
            raise InvalidTiming(
                f"word {self.text!r} ends at {self.end_s} before it starts at {self.start_s}"
            )


@dataclass(frozen=True)
class Segment:
    """One voice-activity segment: a non-empty run of ordered words."""

    words: tuple[WordToken, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise MalformedDocument("segment contains no words")
        for prev, cur in zip(self.words, self.words[1:]):
            if cur.start_s < prev.end_s:
                raise InvalidTiming(
                    f"word {cur.text!r} starts at {cur.start_s} before previous "
                    f"word {prev.text!r} ends at {prev.end_s}"
                )


@dataclass(frozen=True)
class TimedTranscript:
    """All timed words of one subject performing one test."""

    subject_id: str
    test: TestType
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "test", TestType(self.test))
        if not self.subject_id:
            raise MalformedDocument("subject_id must be non-empty")
        if not self.segments:
            raise EmptyTranscript(f"transcript {self.subject_id!r} has no segments")
        for prev, cur in zip(self.segments, self.segments[1:]):
            if cur.words[0].start_s < prev.words[-1].end_s:
                raise InvalidTiming(
                    f"segment starting at {cur.words[0].start_s} overlaps previous "
                    f"segment ending at {prev.words[-1].end_s}"
                )

    def words(self) -> list[WordToken]:
        """All words in time order, across segment boundaries."""
        return [w for seg in self.segments for w in seg.words]


@dataclass(frozen=True)
class PauseBin:
    """Half-open or closed duration interval mapped to one token literal."""

    lower: float
    lower_inclusive: bool
    upper: float
    upper_inclusive: bool
    token: str

    def contains(self, duration_s: float) -> bool:
        above = duration_s >= self.lower if self.lower_inclusive else duration_s > self.lower
        below = duration_s <= self.upper if self.upper_inclusive else duration_s < self.upper
        return above and below


@dataclass(frozen=True)
class PauseScheme:
    """Ordered, disjoint, contiguous bins covering [minimum, inf).

    ``disfluencies`` marks the scheme variant that also inserts the
    ``[*]`` token; it is the default for :func:`enrich` when the caller
    does not say otherwise.
    """

    id: SchemeId
    bins: tuple[PauseBin, ...]
    disfluencies: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "bins", tuple(self.bins))
        if not self.bins:
            raise ValueError("scheme needs at least one bin")
        if not self.bins[0].lower_inclusive:
            raise ValueError("scheme minimum must be inclusive")
        for a, b in zip(self.bins, self.bins[1:]):
            if a.upper != b.lower or a.upper_inclusive == b.lower_inclusive:
                raise ValueError(
                    f"bins {a.token} and {b.token} are not contiguous and disjoint"
                )
        last = self.bins[-1]
        if not (math.isinf(last.upper) and not last.upper_inclusive):
            raise ValueError("last bin must extend to infinity")

    @property
    def minimum_s(self) -> float:
        return self.bins[0].lower


def _scheme(id: SchemeId, spec: Sequence[tuple[float, bool, float, bool, str]],
            disfluencies: bool = False) -> PauseScheme:
    return PauseScheme(id, tuple(PauseBin(*row) for row in spec), disfluencies)


_P3_BINS = (
    (0.2, True, 0.6, True, "[P3.1]"),
    (0.6, False, 1.5, False, "[P3.2]"),
    (1.5, True, math.inf, False, "[P3.3]"),
)

PAUSE_SCHEMES: dict[SchemeId, PauseScheme] = {
    SchemeId.P1: _scheme(SchemeId.P1, (
        (0.05, True, 0.5, False, "[P1.1]"),
        (0.5, True, 2.0, True, "[P1.2]"),
        (2.0, False, math.inf, False, "[P1.3]"),
    )),
    SchemeId.P2: _scheme(SchemeId.P2, (
        (0.05, True, 0.1, True, "[P2.1]"),
        (0.1, False, 0.3, True, "[P2.2]"),
        (0.3, False, 0.6, True, "[P2.3]"),
        (0.6, False, 1.0, True, "[P2.4]"),
        (1.0, False, 2.0, True, "[P2.5]"),
        (2.0, False, math.inf, False, "[P2.6]"),
    )),
    SchemeId.P3: _scheme(SchemeId.P3, _P3_BINS),
    # Same minimum and positions as P3, but duration information is erased.
    SchemeId.P4: _scheme(SchemeId.P4, (
        (0.2, True, math.inf, False, "[P]"),
    )),
    SchemeId.P3_DISFL: _scheme(SchemeId.P3_DISFL, _P3_BINS, disfluencies=True),
}

RESERVED_TOKENS: frozenset[str] = frozenset(
    [b.token for s in PAUSE_SCHEMES.values() for b in s.bins] + [DISFLUENCY_TOKEN]
)


@dataclass(frozen=True)
class PauseEvent:
    """Silent gap after the word with global ordinal ``after_word_index``."""

    after_word_index: int
    duration_s: float


class ItemKind(str, Enum):
    WORD = "word"
    PAUSE = "pause"
    DISFL = "disfl"


@dataclass(frozen=True)
class TranscriptItem:
    kind: ItemKind
    text: str


@dataclass(frozen=True)
class EnrichedTranscript:
    """Word sequence of a transcript interleaved with special tokens."""

    subject_id: str
    test: TestType
    scheme_id: SchemeId
    items: tuple[TranscriptItem, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        for a, b in zip(self.items, self.items[1:]):
            if a.kind == ItemKind.PAUSE and b.kind == ItemKind.PAUSE:
                raise ValueError("two adjacent pause tokens")

    def words(self) -> list[str]:
        return [it.text for it in self.items if it.kind == ItemKind.WORD]


# --- parsing ---------------------------------------------------------------

Documentish = Union[bytes, str, Path, IO[bytes]]


def _document_text(document: Documentish) -> str:
    if isinstance(document, bytes):
        raw = document
    elif isinstance(document, str):
        return document
    elif isinstance(document, Path):
        raw = document.read_bytes()
    elif hasattr(document, "read"):
        raw = document.read()
        if isinstance(raw, str):
            return raw
    else:
        raise TypeError(f"cannot read transcript document from {type(document)!r}")
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedDocument(f"document is not valid UTF-8: {exc}") from exc


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise MalformedDocument(f"{context}: missing field {key!r}")
    return obj[key]


def _number(value, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedDocument(f"{context}: expected a number, got {value!r}")
    return float(value)


def parse_timed_transcript(document: Documentish) -> TimedTranscript:
    """Parse and validate a transcript document (UTF-8 JSON).

    Expected shape::

        {"subject_id": "...", "test": "VFT"|"PDT",
         "segments": [{"words": [{"text": ..., "start": ..., "end": ...,
                                  "disfluent": false}, ...]}, ...]}

    Word overlaps up to 50 ms (alignment jitter) are clamped to a zero gap
    with a warning; larger overlaps raise :class:`InvalidTiming`.
    """
    text = _document_text(document)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("top-level value must be an object")

    subject_id = _require(doc, "subject_id", "document")
    if not isinstance(subject_id, str) or not subject_id:
        raise MalformedDocument("subject_id must be a non-empty string")
    test_raw = _require(doc, "test", "document")
    try:
        test = TestType(test_raw)
    except ValueError:
        raise MalformedDocument(f"test must be 'VFT' or 'PDT', got {test_raw!r}") from None
    segments_raw = _require(doc, "segments", "document")
    if not isinstance(segments_raw, list):
        raise MalformedDocument("segments must be an array")
    if not segments_raw:
        raise EmptyTranscript(f"transcript {subject_id!r} has no segments")

    segments: list[Segment] = []
    prev_end: Optional[float] = None
    n_clamped = 0
    for si, seg_raw in enumerate(segments_raw):
        ctx = f"segment {si}"
        if not isinstance(seg_raw, dict):
            raise MalformedDocument(f"{ctx}: expected an object")
        words_raw = _require(seg_raw, "words", ctx)
        if not isinstance(words_raw, list) or not words_raw:
            raise MalformedDocument(f"{ctx}: words must be a non-empty array")
        words: list[WordToken] = []
        for wi, w_raw in enumerate(words_raw):
            wctx = f"{ctx}, word {wi}"
            if not isinstance(w_raw, dict):
                raise MalformedDocument(f"{wctx}: expected an object")
            w_text = _require(w_raw, "text", wctx)
            if not isinstance(w_text, str):
                raise MalformedDocument(f"{wctx}: text must be a string")
            start = _number(_require(w_raw, "start", wctx), wctx + " start")
            end = _number(_require(w_raw, "end", wctx), wctx + " end")
            disfluent = w_raw.get("disfluent", False)
            if not isinstance(disfluent, bool):
                raise MalformedDocument(f"{wctx}: disfluent must be a boolean")
            if prev_end is not None and start < prev_end:
                deficit = prev_end - start
                if deficit > NEGATIVE_GAP_TOLERANCE_S:
                    raise InvalidTiming(
                        f"{wctx}: word {w_text!r} starts {deficit:.3f}s before the "
                        f"previous word ends"
                    )
                start = prev_end
                n_clamped += 1
            words.append(WordToken(text=w_text, start_s=start, end_s=end, disfluent=disfluent))
            prev_end = words[-1].end_s
        segments.append(Segment(tuple(words)))

    if n_clamped:
        warnings.warn(
            f"transcript {subject_id!r}: clamped {n_clamped} overlapping word "
            f"boundaries (<= {NEGATIVE_GAP_TOLERANCE_S * 1000:.0f} ms jitter) to zero gaps",
            stacklevel=2,
        )
    return TimedTranscript(subject_id=subject_id, test=test, segments=tuple(segments))


def transcript_to_document(t: TimedTranscript) -> str:
    """Serialize a transcript to its canonical JSON document form."""
    doc = {
        "subject_id": t.subject_id,
        "test": t.test.value,
        "segments": [
            {
                "words": [
                    {
                        "text": w.text,
                        "start": w.start_s,
                        "end": w.end_s,
                        **({"disfluent": True} if w.disfluent else {}),
                    }
                    for w in seg.words
                ]
            }
            for seg in t.segments
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


# --- pause computation and enrichment ---------------------------------------

def extract_pauses(t: TimedTranscript) -> list[PauseEvent]:
    """Gaps between consecutive words, within and across segments."""
    words = t.words()
    return [
        PauseEvent(after_word_index=i, duration_s=words[i + 1].start_s - words[i].end_s)
        for i in range(len(words) - 1)
    ]


def bin_pause(scheme: PauseScheme, duration_s: float) -> Optional[str]:
    """Token for the bin containing ``duration_s``, or None below the minimum."""
    if duration_s < 0:
        raise ValueError(f"pause duration must be >= 0, got {duration_s}")
    for b in scheme.bins:
        if b.contains(duration_s):
            return b.token
    return None


def enrich(
    t: TimedTranscript,
    scheme: PauseScheme,
    include_disfluencies: Optional[bool] = None,
) -> EnrichedTranscript:
    """Insert pause (and optionally disfluency) tokens into the word sequence.

    A pause token is placed after the word it follows; a disfluency token is
    placed immediately after each ASR-flagged word, before any pause token
    for the same gap.  ``include_disfluencies=None`` defers to the scheme.
    """
    if include_disfluencies is None:
        include_disfluencies = scheme.disfluencies
    words = t.words()
    pauses = {p.after_word_index: p.duration_s for p in extract_pauses(t)}
    items: list[TranscriptItem] = []
    for i, w in enumerate(words):
        items.append(TranscriptItem(ItemKind.WORD, w.text))
        if include_disfluencies and w.disfluent:
            items.append(TranscriptItem(ItemKind.DISFL, DISFLUENCY_TOKEN))
        if i in pauses:
            token = bin_pause(scheme, pauses[i])
            if token is not None:
                items.append(TranscriptItem(ItemKind.PAUSE, token))
    return EnrichedTranscript(
        subject_id=t.subject_id, test=t.test, scheme_id=scheme.id, items=tuple(items)
    )


def render(e: EnrichedTranscript) -> str:
    """Single-space-joined item texts, special tokens as their literals."""
    return " ".join(it.text for it in e.items)
