import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from missingvoices.transcript import (
    ELISION_MARKER,
    BadLine,
    EmptyText,
    Transcript,
)


def brute_force_window(transcript: Transcript, budget: int) -> str:
    """Independent oracle: try every suffix start, keep the earliest whose
    full render fits the budget."""
    lines = [f"{s.speaker}: {s.text}" for s in transcript.segments]
    for start in range(len(lines) + 1):
        body = "\n".join(lines[start:])
        if len(body) <= budget:
            if start == 0:
                return body
            if not body:
                return ELISION_MARKER
            return f"{ELISION_MARKER}\n{body}"
    return ELISION_MARKER


def make_transcript(entries):
    transcript = Transcript()
    for speaker, text in entries:
        transcript.append(speaker, text)
    return transcript


class TestAppend:
    def test_first_append_gets_seq_1(self):
        transcript = Transcript()
        assert transcript.append("A", "hi").seq == 1

    def test_seqs_dense_and_timestamps_clamped(self, caplog):
        transcript = Transcript()
        transcript.append("A", "one", timestamp=5.0)
        with caplog.at_level("WARNING"):
            second = transcript.append("B", "two", timestamp=2.0)
        assert [s.seq for s in transcript.segments] == [1, 2]
        assert second.timestamp == 5.0
        assert any("clamping" in r.message for r in caplog.records)

    def test_whitespace_only_text_rejected(self):
        transcript = Transcript()
        with pytest.raises(EmptyText):
            transcript.append("A", "   \t ")

    def test_append_only_never_mutates_existing(self):
        transcript = make_transcript([("A", "one"), ("B", "two")])
        before = [dict(s.to_dict()) for s in transcript.segments]
        transcript.append("C", "three")
        assert [dict(s.to_dict()) for s in transcript.segments[:2]] == before


class TestRender:
    def test_empty(self):
        assert Transcript().render() == ""

    def test_direct_concatenation_oracle(self):
        transcript = make_transcript([("A", "hi"), ("B", "yo")])
        assert transcript.render() == "A: hi" + "\n" + "B: yo"

    def test_speaker_with_colon_preserved(self):
        transcript = make_transcript([("Dr: Strange", "hello there")])
        assert transcript.render() == "Dr: Strange: hello there"


class TestWindow:
    def test_budget_covers_everything(self):
        transcript = make_transcript([("A", "one"), ("B", "two")])
        assert transcript.window(10_000) == transcript.render()
        assert ELISION_MARKER not in transcript.window(10_000)

    def test_budget_smaller_than_last_line(self):
        transcript = make_transcript([("A", "a very long closing line indeed")])
        assert transcript.window(3) == ELISION_MARKER

    def test_marker_prefixes_truncated_output(self):
        transcript = make_transcript([("A", "x" * 50), ("B", "y" * 50)])
        out = transcript.window(60)
        assert out.startswith(ELISION_MARKER + "\n")
        assert out.endswith("B: " + "y" * 50)

    def test_invalid_budget(self):
        with pytest.raises(ValueError):
            Transcript().window(0)

    def test_randomized_against_brute_force(self):
        rng = random.Random(1234)
        for _ in range(1000):
            transcript = Transcript()
            for _ in range(rng.randint(0, 12)):
                transcript.append(
                    rng.choice("ABCD"), "".join(rng.choices("words ", k=rng.randint(1, 30))).strip() or "w"
                )
            budget = rng.randint(1, 120)
            got = transcript.window(budget)
            assert got == brute_force_window(transcript, budget)
            body = got[len(ELISION_MARKER) + 1 :] if got.startswith(ELISION_MARKER) else got
            assert len(body) <= budget
            assert transcript.render().endswith(body)

    @given(
        st.lists(
            st.tuples(st.sampled_from(["A", "B", "Cee"]), st.text(min_size=1, max_size=40).filter(str.strip)),
            max_size=10,
        ),
        st.integers(min_value=1, max_value=200),
    )
    @settings(max_examples=200)
    def test_window_matches_oracle_property(self, entries, budget):
        transcript = make_transcript(entries)
        assert transcript.window(budget) == brute_force_window(transcript, budget)

    @given(
        st.lists(
            st.tuples(st.sampled_from(["A", "B"]), st.text(min_size=1, max_size=30).filter(str.strip)),
            max_size=8,
        ),
        st.integers(min_value=1, max_value=150),
        st.integers(min_value=0, max_value=100),
    )
    @settings(max_examples=200)
    def test_window_monotonic_in_budget(self, entries, budget, extra):
        transcript = make_transcript(entries)

        def segment_count(out: str) -> int:
            body = out[len(ELISION_MARKER) + 1 :] if out.startswith(ELISION_MARKER) else out
            return 0 if not body else body.count("\n") + 1

        assert segment_count(transcript.window(budget + extra)) >= segment_count(
            transcript.window(budget)
        )


class TestJsonl:
    def test_empty_round_trip(self):
        assert Transcript.from_jsonl(Transcript().to_jsonl()) == Transcript()

    def test_three_segment_round_trip(self):
        transcript = Transcript()
        transcript.append("A", "one", 1.5)
        transcript.append("B", "two", 2.25)
        transcript.append("A", "three", 2.25)
        again = Transcript.from_jsonl(transcript.to_jsonl())
        assert again == transcript
        assert again.render() == transcript.render()

    def test_malformed_line_number_reported(self):
        text = '{"seq": 1, "ts": 0.0, "speaker": "A", "text": "hi"}\nnot json\n'
        with pytest.raises(BadLine) as exc:
            Transcript.from_jsonl(text)
        assert exc.value.line_number == 2

    def test_missing_field_reported(self):
        text = '{"seq": 1, "ts": 0.0, "speaker": "A"}\n'
        with pytest.raises(BadLine) as exc:
            Transcript.from_jsonl(text)
        assert exc.value.line_number == 1

    def test_non_dense_seq_rejected(self):
        text = '{"seq": 2, "ts": 0.0, "speaker": "A", "text": "hi"}\n'
        with pytest.raises(BadLine):
            Transcript.from_jsonl(text)

    @given(
        st.lists(
            st.tuples(
                st.text(min_size=1, max_size=10).filter(str.strip),
                st.text(min_size=1, max_size=30).filter(lambda t: t.strip() and "\n" not in t),
            ),
            max_size=8,
        )
    )
    def test_round_trip_property(self, entries):
        transcript = make_transcript(entries)
        assert Transcript.from_jsonl(transcript.to_jsonl()) == transcript

    def test_fixture_round_trip(self, fixture_transcript):
        assert len(fixture_transcript.segments) == 20
        assert Transcript.from_jsonl(fixture_transcript.to_jsonl()) == fixture_transcript
