"""Transcript parsing, pause binning, and token insertion."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pausebench.enrichment import (
    DISFLUENCY_TOKEN,
    PAUSE_SCHEMES,
    EmptyTranscript,
    InvalidTiming,
    ItemKind,
    MalformedDocument,
    SchemeId,
    Segment,
    TestType,
    TimedTranscript,
    WordToken,
    bin_pause,
    enrich,
    extract_pauses,
    parse_timed_transcript,
    render,
    scheme_id_from_string,
    transcript_to_document,
)

from conftest import document, transcript_from_gaps, word


# ---------------------------------------------------------------------------
# Independent binning oracles: literal comparison chains, one per scheme.
# These deliberately share no code with the library's interval objects.
# ---------------------------------------------------------------------------

def oracle_p1(d: float):
    if 0.05 <= d < 0.5:
        return "[P1.1]"
    if 0.5 <= d <= 2.0:
        return "[P1.2]"
    if d > 2.0:
        return "[P1.3]"
    return None


def oracle_p2(d: float):
    if 0.05 <= d <= 0.1:
        return "[P2.1]"
    if 0.1 < d <= 0.3:
        return "[P2.2]"
    if 0.3 < d <= 0.6:
        return "[P2.3]"
    if 0.6 < d <= 1.0:
        return "[P2.4]"
    if 1.0 < d <= 2.0:
        return "[P2.5]"
    if d > 2.0:
        return "[P2.6]"
    return None


def oracle_p3(d: float):
    if 0.2 <= d <= 0.6:
        return "[P3.1]"
    if 0.6 < d < 1.5:
        return "[P3.2]"
    if d >= 1.5:
        return "[P3.3]"
    return None


def oracle_p4(d: float):
    return "[P]" if d >= 0.2 else None


ORACLES = {
    SchemeId.P1: oracle_p1,
    SchemeId.P2: oracle_p2,
    SchemeId.P3: oracle_p3,
    SchemeId.P4: oracle_p4,
    SchemeId.P3_DISFL: oracle_p3,
}


class TestBinPause:
    @pytest.mark.parametrize(
        "scheme_id,duration,expected",
        [
            (SchemeId.P1, 0.30, "[P1.1]"),
            (SchemeId.P1, 0.04, None),
            (SchemeId.P3, 1.5, "[P3.3]"),
            (SchemeId.P4, 0.7, "[P]"),
        ],
    )
    def test_documented_cases(self, scheme_id, duration, expected):
        assert bin_pause(PAUSE_SCHEMES[scheme_id], duration) == expected

    @pytest.mark.parametrize("scheme_id", list(SchemeId))
    def test_millisecond_grid_matches_oracle(self, scheme_id):
        scheme = PAUSE_SCHEMES[scheme_id]
        oracle = ORACLES[scheme_id]
        for ms in range(0, 10_001):
            d = ms / 1000.0
            assert bin_pause(scheme, d) == oracle(d), f"{scheme_id} at {d}s"

    @pytest.mark.parametrize("scheme_id", list(SchemeId))
    def test_boundary_points(self, scheme_id):
        scheme = PAUSE_SCHEMES[scheme_id]
        oracle = ORACLES[scheme_id]
        for b in (0.05, 0.1, 0.3, 0.5, 0.6, 1.0, 1.5, 2.0):
            assert bin_pause(scheme, b) == oracle(b)

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            bin_pause(PAUSE_SCHEMES[SchemeId.P1], -0.1)

    @pytest.mark.parametrize("scheme_id", [SchemeId.P1, SchemeId.P2, SchemeId.P3])
    def test_bin_ordinal_monotone(self, scheme_id):
        scheme = PAUSE_SCHEMES[scheme_id]
        ordinal = {b.token: i for i, b in enumerate(scheme.bins)}
        last = -1
        for ms in range(0, 10_001):
            token = bin_pause(scheme, ms / 1000.0)
            if token is not None:
                assert ordinal[token] >= last
                last = ordinal[token]

    @settings(max_examples=200)
    @given(st.floats(min_value=0.0, max_value=100.0, allow_nan=False))
    def test_at_most_one_bin_matches(self, duration):
        for scheme in PAUSE_SCHEMES.values():
            hits = [b.token for b in scheme.bins if b.contains(duration)]
            if duration >= scheme.minimum_s:
                assert len(hits) == 1
            else:
                assert hits == []


class TestParsing:
    def test_simple_document(self):
        t = parse_timed_transcript(document())
        assert t.subject_id == "s1"
        assert t.test is TestType.PDT
        assert len(t.segments) == 1
        assert [w.text for w in t.words()] == ["der", "Hund"]

    def test_accepts_bytes_and_path(self, tmp_path):
        doc = document()
        assert parse_timed_transcript(doc.encode("utf-8")).subject_id == "s1"
        p = tmp_path / "t.json"
        p.write_text(doc, encoding="utf-8")
        assert parse_timed_transcript(p).subject_id == "s1"

    def test_end_before_start(self):
        seg = [{"words": [{"text": "a", "start": 0.5, "end": 0.3}]}]
        with pytest.raises(InvalidTiming):
            parse_timed_transcript(document(segments=seg))

    def test_empty_segments(self):
        with pytest.raises(EmptyTranscript):
            parse_timed_transcript(document(segments=[]))

    def test_invalid_json(self):
        with pytest.raises(MalformedDocument):
            parse_timed_transcript("{not json")

    def test_missing_field(self):
        with pytest.raises(MalformedDocument):
            parse_timed_transcript(json.dumps({"subject_id": "x", "segments": []}))

    def test_bad_test_value(self):
        with pytest.raises(MalformedDocument):
            parse_timed_transcript(document(test="XYZ"))

    def test_boolean_is_not_a_time(self):
        seg = [{"words": [{"text": "a", "start": True, "end": 0.3}]}]
        with pytest.raises(MalformedDocument):
            parse_timed_transcript(document(segments=seg))

    def test_small_overlap_clamped_with_warning(self):
        seg = [{"words": [
            {"text": "a", "start": 0.0, "end": 1.0},
            {"text": "b", "start": 0.97, "end": 1.5},
        ]}]
        with pytest.warns(UserWarning):
            t = parse_timed_transcript(document(segments=seg))
        assert t.words()[1].start_s == 1.0
        assert extract_pauses(t)[0].duration_s == 0.0

    def test_large_overlap_rejected(self):
        seg = [{"words": [
            {"text": "a", "start": 0.0, "end": 1.0},
            {"text": "b", "start": 0.90, "end": 1.5},
        ]}]
        with pytest.raises(InvalidTiming):
            parse_timed_transcript(document(segments=seg))

    def test_reserved_token_as_word(self):
        seg = [{"words": [{"text": "[P3.1]", "start": 0.0, "end": 0.2}]}]
        with pytest.raises(MalformedDocument):
            parse_timed_transcript(document(segments=seg))

    def test_round_trip(self):
        t = TimedTranscript(
            subject_id="rt",
            test=TestType.VFT,
            segments=(
                Segment((word("äh", 0.0, 0.25, disfluent=True), word("hund", 0.5, 0.9))),
                Segment((word("katze", 3.0, 3.5),)),
            ),
        )
        again = parse_timed_transcript(transcript_to_document(t))
        assert again == t


class TestExtractPauses:
    def test_subtraction(self):
        t = transcript_from_gaps([0.35])
        events = extract_pauses(t)
        assert len(events) == 1
        assert events[0].after_word_index == 0
        assert events[0].duration_s == pytest.approx(0.35)

    def test_zero_gap(self):
        t = transcript_from_gaps([0.0])
        assert extract_pauses(t)[0].duration_s == 0.0

    def test_cross_segment_gap(self):
        t = TimedTranscript(
            subject_id="x",
            test=TestType.PDT,
            segments=(
                Segment((word("a", 0.0, 4.0),)),
                Segment((word("b", 6.5, 7.0),)),
            ),
        )
        events = extract_pauses(t)
        assert len(events) == 1
        assert events[0].duration_s == pytest.approx(2.5)

        # brute-force scan over the flattened word list
        words = t.words()
        brute = [words[i + 1].start_s - words[i].end_s for i in range(len(words) - 1)]
        assert [e.duration_s for e in events] == pytest.approx(brute)

    def test_one_event_per_consecutive_pair(self):
        t = transcript_from_gaps([0.1, 0.2, 0.3, 0.4])
        events = extract_pauses(t)
        assert [e.after_word_index for e in events] == [0, 1, 2, 3]


class TestEnrich:
    def test_gap_binned_under_p3(self):
        # "der" ends at 1.0, "Hund" starts at 1.8: a 0.8 s pause
        t = TimedTranscript(
            subject_id="x", test=TestType.PDT,
            segments=(Segment((word("der", 0.6, 1.0), word("Hund", 1.8, 2.2))),),
        )
        e = enrich(t, PAUSE_SCHEMES[SchemeId.P3])
        assert [(i.kind, i.text) for i in e.items] == [
            (ItemKind.WORD, "der"),
            (ItemKind.PAUSE, "[P3.2]"),
            (ItemKind.WORD, "Hund"),
        ]
        e1 = enrich(t, PAUSE_SCHEMES[SchemeId.P1])
        assert [i.text for i in e1.items] == ["der", "[P1.2]", "Hund"]

    def test_tiny_gap_inserts_nothing(self):
        t = transcript_from_gaps([0.01])
        for scheme in PAUSE_SCHEMES.values():
            e = enrich(t, scheme)
            assert all(i.kind is ItemKind.WORD for i in e.items)

    def test_disfluency_token_placement(self):
        t = TimedTranscript(
            subject_id="x", test=TestType.VFT,
            segments=(Segment((
                word("äh", 0.0, 0.3, disfluent=True),
                word("hund", 1.0, 1.4),
            )),),
        )
        e = enrich(t, PAUSE_SCHEMES[SchemeId.P3_DISFL])
        # disfluency marker directly after the word, before the pause token
        assert [i.text for i in e.items] == ["äh", "[*]", "[P3.2]", "hund"]

    def test_plain_p3_ignores_disfluencies(self):
        t = TimedTranscript(
            subject_id="x", test=TestType.VFT,
            segments=(Segment((word("äh", 0.0, 0.3, disfluent=True),)),),
        )
        assert [i.text for i in enrich(t, PAUSE_SCHEMES[SchemeId.P3]).items] == ["äh"]
        forced = enrich(t, PAUSE_SCHEMES[SchemeId.P3], include_disfluencies=True)
        assert [i.text for i in forced.items] == ["äh", DISFLUENCY_TOKEN]

    def test_word_preservation(self):
        t = transcript_from_gaps([0.0, 0.21, 0.7, 2.5, 1.0])
        for scheme in PAUSE_SCHEMES.values():
            e = enrich(t, scheme, include_disfluencies=True)
            kept = [i.text for i in e.items if i.kind is ItemKind.WORD]
            assert kept == [w.text for w in t.words()]

    def test_p4_positions_equal_p3_positions(self):
        import numpy as np
        from conftest import random_transcript

        rng = np.random.default_rng(5)
        p3 = PAUSE_SCHEMES[SchemeId.P3]
        p4 = PAUSE_SCHEMES[SchemeId.P4]
        for _ in range(100):
            t = random_transcript(rng)

            def positions(scheme):
                pos, word_index = set(), -1
                for item in enrich(t, scheme).items:
                    if item.kind is ItemKind.WORD:
                        word_index += 1
                    elif item.kind is ItemKind.PAUSE:
                        pos.add(word_index)
                return pos

            assert positions(p3) == positions(p4)


class TestRender:
    def test_join(self):
        t = TimedTranscript(
            subject_id="x", test=TestType.PDT,
            segments=(Segment((word("der", 0.6, 1.0), word("Hund", 1.8, 2.2))),),
        )
        assert render(enrich(t, PAUSE_SCHEMES[SchemeId.P3])) == "der [P3.2] Hund"

    def test_disfluent_single_word(self):
        t = TimedTranscript(
            subject_id="x", test=TestType.VFT,
            segments=(Segment((word("äh", 0.0, 0.3, disfluent=True),)),),
        )
        assert render(enrich(t, PAUSE_SCHEMES[SchemeId.P3_DISFL])) == "äh [*]"

    def test_words_only(self):
        t = transcript_from_gaps([0.01, 0.02])
        assert render(enrich(t, PAUSE_SCHEMES[SchemeId.P3])) == "w0 w1 w2"


class TestSchemeTable:
    def test_all_schemes_present(self):
        assert set(PAUSE_SCHEMES) == set(SchemeId)

    def test_token_literals(self):
        tokens = {b.token for s in PAUSE_SCHEMES.values() for b in s.bins}
        assert tokens == {
            "[P1.1]", "[P1.2]", "[P1.3]",
            "[P2.1]", "[P2.2]", "[P2.3]", "[P2.4]", "[P2.5]", "[P2.6]",
            "[P3.1]", "[P3.2]", "[P3.3]",
            "[P]",
        }

    def test_only_disfl_scheme_carries_disfluencies(self):
        assert PAUSE_SCHEMES[SchemeId.P3_DISFL].disfluencies
        assert not any(
            PAUSE_SCHEMES[s].disfluencies
            for s in (SchemeId.P1, SchemeId.P2, SchemeId.P3, SchemeId.P4)
        )

    def test_minimums(self):
        assert PAUSE_SCHEMES[SchemeId.P1].minimum_s == pytest.approx(0.05)
        assert PAUSE_SCHEMES[SchemeId.P2].minimum_s == pytest.approx(0.05)
        assert PAUSE_SCHEMES[SchemeId.P3].minimum_s == pytest.approx(0.2)
        assert PAUSE_SCHEMES[SchemeId.P4].minimum_s == pytest.approx(0.2)

    def test_scheme_id_from_string(self):
        assert scheme_id_from_string("p3-disfl") is SchemeId.P3_DISFL
        assert scheme_id_from_string("P2") is SchemeId.P2
        with pytest.raises(MalformedDocument):
            scheme_id_from_string("p9")


class TestWordToken:
    def test_rejects_whitespace(self):
        with pytest.raises(MalformedDocument):
            WordToken(text="two words", start_s=0.0, end_s=1.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidTiming):
            WordToken(text="a", start_s=0.0, end_s=math.inf)

    def test_rejects_negative_start(self):
        with pytest.raises(InvalidTiming):
            WordToken(text="a", start_s=-0.1, end_s=0.2)

    def test_segment_order_enforced(self):
        with pytest.raises(InvalidTiming):
            Segment((word("a", 0.0, 1.0), word("b", 0.5, 1.2)))
