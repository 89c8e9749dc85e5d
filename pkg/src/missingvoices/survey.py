"""Likert survey analytics: per-item means with confidence intervals and
paired pre/post deltas.

Input is a hand-editable CSV (respondent_id,item_id,phase,value). Intervals
are Student-t on the mean; the method is fixed here and reported alongside n
so summaries are self-describing.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

VALUE_MIN = 1
VALUE_MAX = 7

PHASES = ("pre", "post", "activity")


class BadRow(Exception):
    """A CSV row failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}")


class EmptyInput(Exception):
    pass


class NoCompletePairs(Exception):
    pass


@dataclass(frozen=True)
class LikertResponse:
    respondent_id: str
    item_id: str
    phase: str
    value: int


@dataclass(frozen=True)
class MeanCi:
    n: int
    mean: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class ItemSummary:
    item_id: str
    phase: str
    n: int
    mean: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "phase": self.phase,
            "n": self.n,
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


@dataclass(frozen=True)
class PairedRow:
    item_id: str
    n_pairs: int
    n_dropped: int
    mean_pre: float
    mean_post: float
    delta: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "n_pairs": self.n_pairs,
            "n_dropped": self.n_dropped,
            "mean_pre": self.mean_pre,
            "mean_post": self.mean_post,
            "delta": self.delta,
        }


def mean_ci(values: Sequence[float], confidence: float = 0.95) -> MeanCi:
    """Arithmetic mean with a Student-t interval: mean +/- t * s / sqrt(n).

    n == 1 yields the degenerate interval [v, v]; zero variance collapses
    the interval to the mean.
    """
    if len(values) == 0:
        raise EmptyInput("mean_ci requires at least one value")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must be in (0, 1)")
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    n = arr.size
    if n == 1:
        return MeanCi(n=1, mean=mean, ci_low=mean, ci_high=mean)
    sd = float(arr.std(ddof=1))
    half = float(stats.t.ppf((1.0 + confidence) / 2.0, n - 1)) * sd / float(np.sqrt(n))
    return MeanCi(n=n, mean=mean, ci_low=mean - half, ci_high=mean + half)


@dataclass(frozen=True)
class PairedDelta:
    mean_pre: float
    mean_post: float
    delta: float
    n_pairs: int
    n_dropped: int


def _as_mapping(values: Union[Mapping[str, float], Iterable[tuple[str, float]]]) -> dict[str, float]:
    if isinstance(values, Mapping):
        return dict(values)
    return dict(values)


def paired_delta(
    pre: Union[Mapping[str, float], Iterable[tuple[str, float]]],
    post: Union[Mapping[str, float], Iterable[tuple[str, float]]],
) -> PairedDelta:
    """Mean pre, mean post, and their difference over complete pairs.

    Inputs are keyed by respondent; respondents present on only one side are
    dropped and counted in n_dropped.
    """
    pre_map = _as_mapping(pre)
    post_map = _as_mapping(post)
    complete = sorted(pre_map.keys() & post_map.keys())
    dropped = len(pre_map.keys() ^ post_map.keys())
    if not complete:
        raise NoCompletePairs("no respondent appears in both pre and post")
    pre_values = [pre_map[r] for r in complete]
    post_values = [post_map[r] for r in complete]
    mean_pre = float(np.mean(pre_values))
    mean_post = float(np.mean(post_values))
    return PairedDelta(
        mean_pre=mean_pre,
        mean_post=mean_post,
        delta=mean_post - mean_pre,
        n_pairs=len(complete),
        n_dropped=dropped,
    )


def load_csv(source: Union[str, Path]) -> list[LikertResponse]:
    """Read responses from a CSV file path or a CSV text string.

    Expected header: respondent_id,item_id,phase,value. Raises BadRow naming
    the first offending line.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    required = {"respondent_id", "item_id", "phase", "value"}
    missing = required - set(reader.fieldnames)
    if missing:
        raise BadRow(1, f"header missing columns {sorted(missing)}")
    responses: list[LikertResponse] = []
    seen: set[tuple[str, str, str]] = set()
    for row in reader:
        line = reader.line_num
        respondent = (row.get("respondent_id") or "").strip()
        item = (row.get("item_id") or "").strip()
        phase = (row.get("phase") or "").strip().lower()
        raw_value = (row.get("value") or "").strip()
        if not respondent or not item:
            raise BadRow(line, "respondent_id and item_id must be non-empty")
        if phase not in PHASES:
            raise BadRow(line, f"phase must be one of {list(PHASES)}, got {phase!r}")
        try:
            value = int(raw_value)
        except ValueError:
            raise BadRow(line, f"value must be an integer, got {raw_value!r}") from None
        if not VALUE_MIN <= value <= VALUE_MAX:
            raise BadRow(line, f"value {value} outside [{VALUE_MIN}, {VALUE_MAX}]")
        key = (respondent, item, phase)
        if key in seen:
            raise BadRow(line, f"duplicate response for {key}")
        seen.add(key)
        responses.append(
            LikertResponse(respondent_id=respondent, item_id=item, phase=phase, value=value)
        )
    return responses


@dataclass
class SurveyReport:
    items: list[ItemSummary]
    paired: list[PairedRow]

    def to_dict(self) -> dict[str, Any]:
        return {
            "items": [s.to_dict() for s in self.items],
            "paired": [p.to_dict() for p in self.paired],
        }

    def to_table(self) -> str:
        """Aligned text tables; n is always printed."""
        lines: list[str] = []
        if self.items:
            lines.append(f"{'item':<28} {'phase':<9} {'n':>3} {'mean':>6} {'ci95':>16}")
            for s in self.items:
                ci = f"[{s.ci_low:.2f}, {s.ci_high:.2f}]"
                lines.append(f"{s.item_id:<28} {s.phase:<9} {s.n:>3} {s.mean:>6.2f} {ci:>16}")
        if self.paired:
            if lines:
                lines.append("")
            lines.append(
                f"{'item':<28} {'pairs':>5} {'dropped':>7} {'pre':>6} {'post':>6} {'delta':>6}"
            )
            for p in self.paired:
                lines.append(
                    f"{p.item_id:<28} {p.n_pairs:>5} {p.n_dropped:>7} "
                    f"{p.mean_pre:>6.2f} {p.mean_post:>6.2f} {p.delta:>+6.2f}"
                )
        if not lines:
            return "(no responses)"
        return "\n".join(lines)


def summarize_items(
    responses: Iterable[LikertResponse], confidence: float = 0.95
) -> SurveyReport:
    """Group responses by item and phase; also pair pre/post per item."""
    by_group: dict[tuple[str, str], list[LikertResponse]] = {}
    for response in responses:
        by_group.setdefault((response.item_id, response.phase), []).append(response)

    items: list[ItemSummary] = []
    for (item_id, phase), group in sorted(by_group.items()):
        ci = mean_ci([r.value for r in group], confidence)
        items.append(
            ItemSummary(
                item_id=item_id,
                phase=phase,
                n=ci.n,
                mean=ci.mean,
                ci_low=ci.ci_low,
                ci_high=ci.ci_high,
            )
        )

    paired: list[PairedRow] = []
    item_ids = sorted({item_id for item_id, _ in by_group})
    for item_id in item_ids:
        pre_group = by_group.get((item_id, "pre"))
        post_group = by_group.get((item_id, "post"))
        if not pre_group or not post_group:
            continue
        try:
            delta = paired_delta(
                {r.respondent_id: float(r.value) for r in pre_group},
                {r.respondent_id: float(r.value) for r in post_group},
            )
        except NoCompletePairs:
            continue
        paired.append(
            PairedRow(
                item_id=item_id,
                n_pairs=delta.n_pairs,
                n_dropped=delta.n_dropped,
                mean_pre=delta.mean_pre,
                mean_post=delta.mean_post,
                delta=delta.delta,
            )
        )
    return SurveyReport(items=items, paired=paired)
