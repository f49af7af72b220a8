"""Shared builders for transcript documents and tiny cohorts."""

from __future__ import annotations

import json

import numpy as np
import pytest

from pausebench.enrichment import Segment, TestType, TimedTranscript, WordToken
from pausebench.synthcohort import CohortSpec, generate_cohort


def word(text: str, start: float, end: float, disfluent: bool = False) -> WordToken:
    return WordToken(text=text, start_s=start, end_s=end, disfluent=disfluent)


def transcript_from_gaps(
    gaps: list[float], word_s: float = 0.3, subject_id: str = "s1",
    test: TestType = TestType.PDT,
) -> TimedTranscript:
    """One-segment transcript whose inter-word gaps are exactly ``gaps``."""
    words = []
    cursor = 0.0
    for i in range(len(gaps) + 1):
        words.append(word(f"w{i}", cursor, cursor + word_s))
        cursor += word_s
        if i < len(gaps):
            cursor += gaps[i]
    return TimedTranscript(subject_id=subject_id, test=test, segments=(Segment(tuple(words)),))


def document(subject_id: str = "s1", test: str = "PDT", segments=None) -> str:
    if segments is None:
        segments = [
            {"words": [
                {"text": "der", "start": 0.0, "end": 0.4},
                {"text": "Hund", "start": 1.2, "end": 1.6},
            ]}
        ]
    return json.dumps({"subject_id": subject_id, "test": test, "segments": segments})


def random_transcript(rng: np.random.Generator, max_words: int = 12) -> TimedTranscript:
    n = int(rng.integers(2, max_words + 1))
    gaps = rng.choice(
        [0.0, 0.01, 0.05, 0.1, 0.19, 0.2, 0.3, 0.6, 0.61, 1.0, 1.5, 2.0, 2.5, 5.0],
        size=n - 1,
    )
    extra = rng.uniform(0, 3, size=n - 1) * (rng.random(n - 1) < 0.5)
    return transcript_from_gaps(list(np.asarray(gaps) + extra))


@pytest.fixture(scope="session")
def tiny_cohort(tmp_path_factory):
    """10+10 strongly separated NC/MCI cohort shared by training tests."""
    spec = CohortSpec(
        seed=1, count_nc=10, count_mci=10, count_ad=0, delta=3.0, mean_words=8.0
    )
    out = tmp_path_factory.mktemp("tiny_cohort")
    return generate_cohort(spec, out)
