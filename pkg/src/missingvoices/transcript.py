"""Append-only discussion transcript with rendering and prompt windowing.

Speech-to-text is out of scope: any captioning client (or a facilitator
typing) posts plain text segments. Segments are never mutated or deleted;
seq numbers are dense from 1.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any

logger = logging.getLogger(__name__)

# Character budget instead of model tokens: avoids a tokenizer dependency.
# Roughly 6k tokens of recent conversation, which is plenty for one session.
DEFAULT_WINDOW_CHARS = 24_000

ELISION_MARKER = "[... earlier conversation omitted ...]"


class EmptyText(Exception):
    """Segment text is empty after trimming."""


class BadLine(Exception):
    """A JSONL line failed to parse or misses required keys."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


@dataclass
class TranscriptSegment:
    seq: int
    timestamp: float
    speaker: str
    text: str

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "ts": self.timestamp, "speaker": self.speaker, "text": self.text}


@dataclass
class Transcript:
    segments: list[TranscriptSegment] = field(default_factory=list)

    def append(self, speaker: str, text: str, timestamp: float = 0.0) -> TranscriptSegment:
        """Append a segment with the next seq. Out-of-order timestamps are
        clamped to the previous segment's timestamp (captioning feeds jitter)."""
        if not text.strip():
            raise EmptyText("segment text is empty")
        previous = self.segments[-1].timestamp if self.segments else 0.0
        if timestamp < previous:
            logger.warning(
                "timestamp %.3f precedes previous segment (%.3f); clamping", timestamp, previous
            )
            timestamp = previous
        segment = TranscriptSegment(
            seq=len(self.segments) + 1,
            timestamp=max(0.0, timestamp),
            speaker=speaker,
            text=text,
        )
        self.segments.append(segment)
        return segment

    def render(self) -> str:
        """One "Speaker: text" line per segment, in order."""
        return "\n".join(f"{s.speaker}: {s.text}" for s in self.segments)

    def window(self, char_budget: int) -> str:
        """Render the maximal suffix of whole segments fitting char_budget.

        When older segments are dropped, the result is prefixed with an
        elision marker line so the model knows it sees a partial view.
        """
        if char_budget < 1:
            raise ValueError("char_budget must be >= 1")
        lines = [f"{s.speaker}: {s.text}" for s in self.segments]
        kept: list[str] = []
        used = 0
        for line in reversed(lines):
            cost = len(line) if not kept else len(line) + 1
            if used + cost > char_budget:
                break
            kept.append(line)
            used += cost
        body = "\n".join(reversed(kept))
        if len(kept) == len(lines):
            return body
        if not body:
            return ELISION_MARKER
        return f"{ELISION_MARKER}\n{body}"

    def to_jsonl(self) -> str:
        return "".join(json.dumps(s.to_dict()) + "\n" for s in self.segments)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        """Parse a JSONL export. Raises BadLine with the 1-based line number
        of the first malformed line."""
        transcript = cls()
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BadLine(number, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(raw, dict):
                raise BadLine(number, "expected a JSON object")
            try:
                segment = TranscriptSegment(
                    seq=int(raw["seq"]),
                    timestamp=float(raw["ts"]),
                    speaker=str(raw["speaker"]),
                    text=str(raw["text"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise BadLine(number, f"missing or invalid field ({exc})") from exc
            expected = len(transcript.segments) + 1
            if segment.seq != expected:
                raise BadLine(number, f"expected seq {expected}, got {segment.seq}")
            transcript.segments.append(segment)
        return transcript

    def to_dicts(self) -> list[dict[str, Any]]:
        return [s.to_dict() for s in self.segments]

    @classmethod
    def from_dicts(cls, raw: list[dict[str, Any]]) -> "Transcript":
        transcript = cls()
        for entry in raw:
            transcript.segments.append(
                TranscriptSegment(
                    seq=int(entry["seq"]),
                    timestamp=float(entry["ts"]),
                    speaker=str(entry["speaker"]),
                    text=str(entry["text"]),
                )
            )
        return transcript
