"""Synthetic cohorts with class-conditional pause behaviour.

Real clinical recordings are proprietary, so the pipeline is exercised on
generated data instead: each subject gets a word-timed transcript whose
inter-word pauses are drawn log-normally with a class-dependent location,
plus text and audio embedding matrices.  Embedding rows depend only on
token kind (word vs. each pause token) and, for audio, on how much of the
window is speech — so pause structure is the sole class signal, and a
separation knob of zero makes the classes statistically identical.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

from .enrichment import (
    PAUSE_SCHEMES,
    ItemKind,
    SchemeId,
    scheme_id_from_string,
    Segment,
    TestType,
    TimedTranscript,
    WordToken,
    enrich,
    render,
    transcript_to_document,
)
from .tensorio import (
    EMBED_DIM,
    CohortManifest,
    EmbeddingMatrix,
    IoFailure,
    Label,
    SampleRecord,
    write_manifest,
    write_matrix,
)

__all__ = [
    "SpecError",
    "PauseParams",
    "CohortSpec",
    "GeneratedCohort",
    "CLASS_RANKS",
    "class_profiles",
    "sample_pause_durations",
    "generate_cohort",
    "load_cohort_spec",
    "cohort_spec_to_json",
]


class SpecError(ValueError):
    """A cohort description is unreadable or violates its invariants."""


# Impairment order; the separation knob shifts pause-length location with rank.
CLASS_RANKS: dict[Label, int] = {Label.NC: 0, Label.MCI: 1, Label.AD: 2}

_VOCAB = {
    TestType.VFT: (
        "hund", "katze", "pferd", "kuh", "maus", "vogel", "fisch", "schaf",
        "ziege", "fuchs", "hase", "igel", "wolf", "baer", "esel", "ente",
    ),
    TestType.PDT: (
        "berg", "see", "haus", "baum", "wiese", "himmel", "wolke", "weg",
        "boot", "ufer", "wald", "dorf", "bruecke", "feld", "stein", "blume",
    ),
}

_MIN_SUBJECTS = 5


@dataclass(frozen=True)
class PauseParams:
    """Log-normal location/scale for inter-word pause seconds."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu):
            raise SpecError("pause location must be finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise SpecError("pause scale must be positive")


@dataclass(frozen=True)
class CohortSpec:
    """Everything that determines a generated cohort, including the seed."""

    seed: int = 0
    test: TestType = TestType.PDT
    scheme: SchemeId = SchemeId.P3
    include_disfluencies: Optional[bool] = None
    count_nc: int = 82
    count_mci: int = 58
    count_ad: int = 65
    base_mu: float = field(default=math.log(0.25))
    sigma: float = 0.9
    delta: float = 0.0
    mean_words: float = 22.0
    word_mu: float = field(default=math.log(0.3))
    word_sigma: float = 0.25
    disfluency_rate: float = 0.05
    embed_spread: float = 0.1
    audio_window_s: float = 10.0
    audio_spread: float = 0.1
    max_pause_s: float = 60.0
    text_pause_tokens: bool = True

    def __post_init__(self) -> None:
        try:
            if not isinstance(self.test, TestType):
                object.__setattr__(self, "test", TestType(str(self.test).upper()))
            if not isinstance(self.scheme, SchemeId):
                object.__setattr__(self, "scheme", scheme_id_from_string(str(self.scheme)))
        except ValueError as exc:
            raise SpecError(str(exc)) from exc
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise SpecError(f"seed must be an integer, got {self.seed!r}")
        if self.seed < 0:
            raise SpecError(f"seed must be >= 0, got {self.seed}")
        for name in ("count_nc", "count_mci", "count_ad"):
            n = getattr(self, name)
            if not isinstance(n, int) or isinstance(n, bool):
                raise SpecError(f"{name} must be an integer, got {n!r}")
            if n < 0 or (0 < n < _MIN_SUBJECTS):
                raise SpecError(f"{name} must be 0 or >= {_MIN_SUBJECTS}, got {n}")
        for name in (
            "base_mu", "sigma", "delta", "mean_words", "word_mu", "word_sigma",
            "disfluency_rate", "embed_spread", "audio_window_s", "audio_spread",
            "max_pause_s",
        ):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) \
                    or not math.isfinite(value):
                raise SpecError(f"{name} must be a finite number, got {value!r}")
        if self.count_nc + self.count_mci + self.count_ad == 0:
            raise SpecError("cohort has no subjects")
        if self.sigma <= 0 or self.word_sigma <= 0:
            raise SpecError("duration scales must be positive")
        if self.delta < 0:
            raise SpecError("class separation must be >= 0")
        if self.mean_words < 4:
            raise SpecError("mean_words must be >= 4")
        if not 0 <= self.disfluency_rate <= 1:
            raise SpecError("disfluency_rate must be in [0, 1]")
        if self.embed_spread <= 0 or self.audio_spread <= 0:
            raise SpecError("embedding spreads must be positive")
        if self.audio_window_s <= 0:
            raise SpecError("audio window length must be positive")
        if self.max_pause_s <= 0:
            raise SpecError("max_pause_s must be positive")

    def counts(self) -> dict[Label, int]:
        return {Label.NC: self.count_nc, Label.MCI: self.count_mci, Label.AD: self.count_ad}


def class_profiles(spec: CohortSpec) -> dict[Label, PauseParams]:
    """Pause distributions per class: rank-proportional location shift.

    Adjacent classes sit delta/2 apart in log-seconds, so NC and AD differ
    by the full knob; delta = 0 collapses all three to the same law.
    """
    return {
        label: PauseParams(mu=spec.base_mu + spec.delta * rank / 2.0, sigma=spec.sigma)
        for label, rank in CLASS_RANKS.items()
    }


def sample_pause_durations(
    params: PauseParams, word_count: int, rng: np.random.Generator, max_s: float = 60.0
) -> np.ndarray:
    """word_count - 1 nonnegative pause lengths in seconds, capped at max_s."""
    if word_count < 2:
        raise ValueError(f"need at least 2 words to have pauses, got {word_count}")
    draws = rng.lognormal(mean=params.mu, sigma=params.sigma, size=word_count - 1)
    return np.minimum(draws, max_s)


@dataclass(frozen=True)
class GeneratedCohort:
    root: Path
    manifest_path: Path
    manifest: CohortManifest


def _token_center(seed: int, kind: str) -> np.ndarray:
    """Deterministic 768-dim center per token kind, shared by all classes."""
    rng = np.random.default_rng([seed, 7, zlib.crc32(kind.encode("utf-8"))])
    return rng.normal(size=EMBED_DIM)


def _ms(x: float) -> int:
    return int(round(x * 1000.0))


def _build_transcript(
    spec: CohortSpec, subject_id: str, profile: PauseParams, rng: np.random.Generator
) -> TimedTranscript:
    n_words = max(2, int(rng.poisson(spec.mean_words)))
    word_s = np.clip(
        rng.lognormal(spec.word_mu, spec.word_sigma, size=n_words), 0.05, 2.0
    )
    pause_s = sample_pause_durations(profile, n_words, rng, max_s=spec.max_pause_s)
    vocab = _VOCAB[spec.test]
    texts = [vocab[int(rng.integers(len(vocab)))] for _ in range(n_words)]
    disfl = rng.random(n_words) < spec.disfluency_rate

    # Integer-millisecond timeline keeps serialized timings exact.
    words: list[WordToken] = []
    cursor = _ms(rng.uniform(0.1, 0.5))
    for i in range(n_words):
        start = cursor
        end = start + max(1, _ms(word_s[i]))
        words.append(
            WordToken(
                text=texts[i],
                start_s=start / 1000.0,
                end_s=end / 1000.0,
                disfluent=bool(disfl[i]),
            )
        )
        cursor = end
        if i < n_words - 1:
            cursor += _ms(pause_s[i])

    if n_words >= 8:
        cut = n_words // 2
        segments = (Segment(tuple(words[:cut])), Segment(tuple(words[cut:])))
    else:
        segments = (Segment(tuple(words)),)
    return TimedTranscript(subject_id=subject_id, test=spec.test, segments=segments)


def _text_rows(
    spec: CohortSpec,
    enriched_items,
    centers: dict[str, np.ndarray],
    rng: np.random.Generator,
) -> np.ndarray:
    kinds: list[str] = []
    for item in enriched_items:
        if item.kind is ItemKind.WORD:
            kinds.append("word")
        elif spec.text_pause_tokens:
            kinds.append(item.text)
    if not kinds:
        kinds = ["word"]
    rows = np.stack([centers[k] for k in kinds])
    rows = rows + rng.normal(size=rows.shape) * spec.embed_spread
    return rows.astype(np.float32)


def _audio_rows(
    spec: CohortSpec,
    transcript: TimedTranscript,
    trailing_s: float,
    centers: dict[str, np.ndarray],
    rng: np.random.Generator,
) -> np.ndarray:
    words = transcript.words()
    total = words[-1].end_s + trailing_s
    window = spec.audio_window_s
    bounds: list[tuple[float, float]] = []
    full = int(total // window)
    for w in range(full):
        bounds.append((w * window, (w + 1) * window))
    rem_start = full * window
    if total - rem_start >= 1.0:
        bounds.append((rem_start, total))
    if not bounds:  # very short recording: keep a single partial window
        bounds.append((0.0, total))

    speech, silence = centers["speech"], centers["silence"]
    rows = np.empty((len(bounds), EMBED_DIM))
    for i, (lo, hi) in enumerate(bounds):
        voiced = sum(
            max(0.0, min(w.end_s, hi) - max(w.start_s, lo)) for w in words
        )
        frac = voiced / (hi - lo)
        rows[i] = speech * frac + silence * (1.0 - frac)
    rows = rows + rng.normal(size=rows.shape) * spec.audio_spread
    return rows.astype(np.float32)


def generate_cohort(spec: CohortSpec, out_dir: Union[str, Path]) -> GeneratedCohort:
    """Write transcripts, enriched text, matrices, and a manifest.

    Output is a pure function of the spec: every subject's randomness comes
    from (seed, subject ordinal), independent of generation order.
    """
    root = Path(out_dir)
    scheme = PAUSE_SCHEMES[spec.scheme]
    profiles = class_profiles(spec)
    token_kinds = ["word", "speech", "silence", "[*]"] + [b.token for b in scheme.bins]
    centers = {k: _token_center(spec.seed, k) for k in token_kinds}

    try:
        for sub in ("transcripts", "enriched", "text", "audio"):
            (root / sub).mkdir(parents=True, exist_ok=True)

        records: list[SampleRecord] = []
        ordinal = 0
        for label in (Label.NC, Label.MCI, Label.AD):
            for i in range(spec.counts()[label]):
                sid = f"{label.value.lower()}{i:03d}"
                rng = np.random.default_rng([spec.seed, ordinal])
                transcript = _build_transcript(spec, sid, profiles[label], rng)
                trailing = float(rng.uniform(0.2, 0.8))

                transcript_path = root / "transcripts" / f"{sid}.json"
                transcript_path.write_text(
                    transcript_to_document(transcript), encoding="utf-8"
                )
                enriched = enrich(transcript, scheme, spec.include_disfluencies)
                enriched_path = root / "enriched" / f"{sid}.txt"
                enriched_path.write_text(render(enriched) + "\n", encoding="utf-8")

                text_path = root / "text" / f"{sid}.pemb"
                write_matrix(
                    EmbeddingMatrix(_text_rows(spec, enriched.items, centers, rng)),
                    text_path,
                )
                audio_path = root / "audio" / f"{sid}.pemb"
                write_matrix(
                    EmbeddingMatrix(
                        _audio_rows(spec, transcript, trailing, centers, rng)
                    ),
                    audio_path,
                )
                records.append(
                    SampleRecord(
                        subject_id=sid,
                        label=label,
                        test=spec.test,
                        text_matrix_path=text_path.resolve(),
                        audio_matrix_path=audio_path.resolve(),
                        enriched_transcript_path=enriched_path.resolve(),
                    )
                )
                ordinal += 1

        manifest = CohortManifest(
            schema_version=1, scheme_id=spec.scheme, records=tuple(records)
        )
        manifest_path = root / "manifest.json"
        write_manifest(manifest, manifest_path)
    except OSError as exc:
        raise IoFailure(f"cannot write cohort under {root}: {exc}") from exc
    return GeneratedCohort(root=root, manifest_path=manifest_path, manifest=manifest)


_SPEC_KEYS = {
    "seed", "test", "scheme", "include_disfluencies", "counts",
    "base_mu", "sigma", "delta", "mean_words", "word_mu", "word_sigma",
    "disfluency_rate", "embed_spread", "audio_window_s", "audio_spread",
    "max_pause_s", "text_pause_tokens",
}


def load_cohort_spec(source: Union[str, Path, IO[str]]) -> CohortSpec:
    """Read a cohort description document (UTF-8 JSON, strict keys)."""
    try:
        if isinstance(source, (str, Path)):
            raw = Path(source).read_text(encoding="utf-8")
        else:
            raw = source.read()
    except OSError as exc:
        raise IoFailure(f"cannot read cohort spec: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SpecError(f"cohort spec is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecError("cohort spec must be a JSON object")
    unknown = set(doc) - _SPEC_KEYS
    if unknown:
        raise SpecError(f"unknown cohort spec keys: {sorted(unknown)}")

    kwargs: dict = {k: v for k, v in doc.items() if k not in ("counts", "test", "scheme")}
    if "test" in doc:
        kwargs["test"] = str(doc["test"])
    if "scheme" in doc:
        kwargs["scheme"] = str(doc["scheme"])
    if "counts" in doc:
        counts = doc["counts"]
        if not isinstance(counts, dict) or set(counts) - {"nc", "mci", "ad"}:
            raise SpecError('counts must be an object with keys from {"nc","mci","ad"}')
        for key, attr in (("nc", "count_nc"), ("mci", "count_mci"), ("ad", "count_ad")):
            if key in counts:
                kwargs[attr] = int(counts[key])
    try:
        return CohortSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(f"invalid cohort spec: {exc}") from exc


def cohort_spec_to_json(spec: CohortSpec) -> str:
    doc = {
        "seed": spec.seed,
        "test": spec.test.value,
        "scheme": spec.scheme.value,
        "include_disfluencies": spec.include_disfluencies,
        "counts": {"nc": spec.count_nc, "mci": spec.count_mci, "ad": spec.count_ad},
        "base_mu": spec.base_mu,
        "sigma": spec.sigma,
        "delta": spec.delta,
        "mean_words": spec.mean_words,
        "word_mu": spec.word_mu,
        "word_sigma": spec.word_sigma,
        "disfluency_rate": spec.disfluency_rate,
        "embed_spread": spec.embed_spread,
        "audio_window_s": spec.audio_window_s,
        "audio_spread": spec.audio_spread,
        "max_pause_s": spec.max_pause_s,
        "text_pause_tokens": spec.text_pause_tokens,
    }
    return json.dumps(doc, indent=2) + "\n"
