"""Error sampling with a human annotation round trip, category tallies,
and between-system prediction shift analysis.

Annotation sheets are TSV (csv module quoting, so embedded newlines in
the context column survive) with a trailing category column the human
fills in; categories are matched case-insensitively on read-back.
"""

from __future__ import annotations

import csv
import random
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import IO, Optional, Sequence


class ErrorCategory(Enum):
    BOTH_HAPPENING_SAME_PART = "Both Happening (Same Part)"
    BOTH_HAPPENING_DIFF_PART = "Both Happening (Diff. Part)"
    GOLD_ERROR_CORRECT = "Gold Error (Correct)"
    GOLD_ERROR_INCORRECT = "Gold Error (Incorrect)"
    TRUE_FOR_PREVIOUS = "True for Previous"
    PREDICTED_OTHER = "Predicted Other"
    NO_IDEA = "No Idea"

    @classmethod
    def parse(cls, s: str) -> "ErrorCategory":
        wanted = s.strip().lower()
        for cat in cls:
            if cat.value.lower() == wanted:
                return cat
        raise ValueError(f"unknown error category: {s!r}")


class SheetError(ValueError):
    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ErrorSample:
    example_id: str
    conversation_id: str
    turn: int
    fold: int
    context: str
    text: str
    gold: str
    predicted: str
    category: Optional[ErrorCategory] = None

    def __post_init__(self):
        if self.gold == self.predicted:
            raise ValueError(f"{self.example_id}: not a misclassification")


@dataclass(frozen=True)
class ScoredExample:
    """One scored utterance: everything sampling and shifting need."""

    example_id: str
    conversation_id: str
    turn: int
    fold: int
    context: str
    text: str
    gold: str
    predicted: str


def sample_errors(
    scored: Sequence[ScoredExample],
    per_fold: int = 5,
    cap: int = 25,
    seed: int = 0,
) -> list[ErrorSample]:
    """Per gold label, draw up to `per_fold` misclassified examples from
    each fold uniformly without replacement, capped at `cap` per label.
    Deterministic under the seed."""
    errors = [s for s in scored if s.gold != s.predicted]
    by_label_fold: dict[tuple[str, int], list[ScoredExample]] = {}
    for s in errors:
        by_label_fold.setdefault((s.gold, s.fold), []).append(s)

    labels = sorted({s.gold for s in errors})
    folds = sorted({s.fold for s in scored})
    rng = random.Random(seed)
    samples: list[ErrorSample] = []
    for label in labels:
        taken = 0
        for fold in folds:
            if taken >= cap:
                break
            pool = sorted(
                by_label_fold.get((label, fold), []), key=lambda s: s.example_id
            )
            want = min(per_fold, cap - taken, len(pool))
            if want == 0:
                continue
            picked = rng.sample(pool, want)
            picked.sort(key=lambda s: s.example_id)
            for s in picked:
                samples.append(
                    ErrorSample(
                        example_id=s.example_id,
                        conversation_id=s.conversation_id,
                        turn=s.turn,
                        fold=s.fold,
                        context=s.context,
                        text=s.text,
                        gold=s.gold,
                        predicted=s.predicted,
                    )
                )
            taken += want
    return samples


SHEET_COLUMNS = (
    "example_id",
    "conversation_id",
    "turn",
    "fold",
    "context",
    "text",
    "gold",
    "predicted",
    "category",
)


def write_sheet(samples: Sequence[ErrorSample], stream: IO[str]) -> None:
    writer = csv.writer(stream, delimiter="\t", lineterminator="\n")
    writer.writerow(SHEET_COLUMNS)
    for s in samples:
        writer.writerow(
            [
                s.example_id,
                s.conversation_id,
                s.turn,
                s.fold,
                s.context,
                s.text,
                s.gold,
                s.predicted,
                s.category.value if s.category else "",
            ]
        )


def read_sheet(stream: IO[str], require_category: bool = False) -> list[ErrorSample]:
    reader = csv.reader(stream, delimiter="\t")
    try:
        header = next(reader)
    except StopIteration:
        raise SheetError("empty sheet") from None
    if tuple(header) != SHEET_COLUMNS:
        raise SheetError(f"unexpected header: {header!r}")
    samples = []
    for rownum, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(SHEET_COLUMNS):
            raise SheetError(f"expected {len(SHEET_COLUMNS)} columns, got {len(row)}", rownum)
        rec = dict(zip(SHEET_COLUMNS, row))
        category = None
        if rec["category"].strip():
            try:
                category = ErrorCategory.parse(rec["category"])
            except ValueError as exc:
                raise SheetError(str(exc), rownum) from None
        elif require_category:
            raise SheetError("category missing", rownum)
        samples.append(
            ErrorSample(
                example_id=rec["example_id"],
                conversation_id=rec["conversation_id"],
                turn=int(rec["turn"]),
                fold=int(rec["fold"]),
                context=rec["context"],
                text=rec["text"],
                gold=rec["gold"],
                predicted=rec["predicted"],
                category=category,
            )
        )
    return samples


@dataclass(frozen=True)
class ErrorTally:
    counts: dict[str, dict[ErrorCategory, int]]  # gold label -> category -> count
    total: int
    gold_error_rate: float
    prediction_correct_rate: float

    def row_total(self, label: str) -> int:
        return sum(self.counts[label].values())

    def column_total(self, category: ErrorCategory) -> int:
        return sum(row.get(category, 0) for row in self.counts.values())

    def to_json(self) -> dict:
        return {
            "counts": {
                label: {cat.value: n for cat, n in row.items() if n}
                for label, row in self.counts.items()
            },
            "total": self.total,
            "gold_error_rate": self.gold_error_rate,
            "prediction_correct_rate": self.prediction_correct_rate,
        }


def tally_errors(samples: Sequence[ErrorSample]) -> ErrorTally:
    """Tally an annotated sheet into gold-label x category counts."""
    for i, s in enumerate(samples):
        if s.category is None:
            raise SheetError("category missing", i + 2)
    labels = sorted({s.gold for s in samples})
    counts = {
        label: {cat: 0 for cat in ErrorCategory} for label in labels
    }
    for s in samples:
        counts[s.gold][s.category] += 1
    total = len(samples)
    gold_errors = sum(
        1
        for s in samples
        if s.category in (ErrorCategory.GOLD_ERROR_CORRECT, ErrorCategory.GOLD_ERROR_INCORRECT)
    )
    actually_correct = sum(
        1
        for s in samples
        if s.category
        in (
            ErrorCategory.BOTH_HAPPENING_SAME_PART,
            ErrorCategory.BOTH_HAPPENING_DIFF_PART,
            ErrorCategory.GOLD_ERROR_CORRECT,
        )
    )
    return ErrorTally(
        counts=counts,
        total=total,
        gold_error_rate=gold_errors / total if total else 0.0,
        prediction_correct_rate=actually_correct / total if total else 0.0,
    )


def render_tally(tally: ErrorTally) -> str:
    cats = list(ErrorCategory)
    width = max(len(c.value) for c in cats) + 2
    labels = sorted(tally.counts)
    header = " " * width + "".join(f"{l:>8}" for l in labels) + f"{'total':>8}"
    lines = [header, "-" * len(header)]
    for cat in cats:
        cells = "".join(f"{tally.counts[l][cat]:>8d}" for l in labels)
        lines.append(f"{cat.value:<{width}}" + cells + f"{tally.column_total(cat):>8d}")
    lines.append("-" * len(header))
    totals = "".join(f"{tally.row_total(l):>8d}" for l in labels)
    lines.append(f"{'total':<{width}}" + totals + f"{tally.total:>8d}")
    lines.append("")
    lines.append(f"gold error rate: {tally.gold_error_rate:.1%}")
    lines.append(f"prediction actually correct: {tally.prediction_correct_rate:.1%}")
    return "\n".join(lines)


class Outcome(Enum):
    TP = "TP"
    FP = "FP"
    TN = "TN"
    FN = "FN"


def outcome(gold: str, predicted: str, target: str) -> Outcome:
    """Classify a prediction relative to a one-vs-rest target label."""
    if gold == target:
        return Outcome.TP if predicted == target else Outcome.FN
    return Outcome.FP if predicted == target else Outcome.TN


TRANSITIONS = (
    (Outcome.FN, Outcome.TP),
    (Outcome.TP, Outcome.FN),
    (Outcome.FP, Outcome.TN),
    (Outcome.TN, Outcome.FP),
)


@dataclass(frozen=True)
class ShiftCell:
    count: int
    tag_distribution: dict[str, float]  # collapsed tag -> fraction

    def to_json(self) -> dict:
        return {"count": self.count, "tag_distribution": self.tag_distribution}


@dataclass(frozen=True)
class ShiftReport:
    target: str
    cells: dict[tuple[Outcome, Outcome], ShiftCell]
    unchanged: int
    total: int
    overall_distribution: dict[str, float]
    target_distribution: dict[str, float]  # over gold == target utterances
    restricted_tags: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "cells": {
                f"{a.value}->{b.value}": cell.to_json() for (a, b), cell in self.cells.items()
            },
            "unchanged": self.unchanged,
            "total": self.total,
            "overall_distribution": self.overall_distribution,
            "target_distribution": self.target_distribution,
            "restricted_tags": list(self.restricted_tags),
        }


def _distribution(
    tags: Sequence[str],
    restrict: Optional[Sequence[str]],
) -> dict[str, float]:
    counts = Counter(tags)
    if restrict:
        counts = Counter({t: counts[t] for t in restrict})
    total = sum(counts.values())
    if total == 0:
        return {t: 0.0 for t in (restrict or [])}
    keys = restrict if restrict else sorted(counts)
    return {t: counts[t] / total for t in keys}


def shift_analysis(
    gold: Sequence[str],
    preds_a: Sequence[str],
    preds_b: Sequence[str],
    target: str,
    da_tags: Sequence[str],
    collapse_map: Optional[dict[str, str]] = None,
    restrict_tags: Sequence[str] = ("Statement", "Question"),
) -> ShiftReport:
    """Bucket per-utterance outcome transitions between system A and B for
    one target label, with a dialog act distribution per changed cell."""
    if not (len(gold) == len(preds_a) == len(preds_b) == len(da_tags)):
        raise ValueError("gold, predictions, and dialog act vectors are misaligned")
    collapse = collapse_map or {}
    collapsed = [collapse.get(t, t) for t in da_tags]
    buckets: dict[tuple[Outcome, Outcome], list[str]] = {t: [] for t in TRANSITIONS}
    unchanged = 0
    for g, pa, pb, tag in zip(gold, preds_a, preds_b, collapsed):
        oa = outcome(g, pa, target)
        ob = outcome(g, pb, target)
        if oa == ob:
            unchanged += 1
        else:
            buckets[(oa, ob)].append(tag)
    cells = {
        trans: ShiftCell(
            count=len(tags), tag_distribution=_distribution(tags, restrict_tags)
        )
        for trans, tags in buckets.items()
    }
    target_tags = [t for g, t in zip(gold, collapsed) if g == target]
    return ShiftReport(
        target=target,
        cells=cells,
        unchanged=unchanged,
        total=len(gold),
        overall_distribution=_distribution(collapsed, restrict_tags),
        target_distribution=_distribution(target_tags, restrict_tags),
        restricted_tags=tuple(restrict_tags),
    )


def render_shift(report: ShiftReport) -> str:
    tags = report.restricted_tags
    cols = ["All", report.target] + [f"{a.value} to {b.value}" for a, b in TRANSITIONS]
    width = 12
    lines = [f"{'':<14}" + "".join(f"{c:>{width}}" for c in cols)]
    dists = [report.overall_distribution, report.target_distribution] + [
        report.cells[t].tag_distribution for t in TRANSITIONS
    ]
    for tag in tags:
        cells = "".join(f"{d.get(tag, 0.0):>{width}.0%}" for d in dists)
        lines.append(f"{tag:<14}" + cells)
    count_cells = ["-", "-"] + [str(report.cells[t].count) for t in TRANSITIONS]
    lines.append(f"{'count':<14}" + "".join(f"{c:>{width}}" for c in count_cells))
    return "\n".join(lines)
