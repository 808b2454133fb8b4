"""Confusion matrices, per-label P/R/F1, aggregates, and fold averaging.

Macro averages cover only labels with gold support in the scored set;
a configurable exclusion set additionally drops volatile rare labels
(spos- by default). 0/0 cells are defined as 0 so reports are total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence


@dataclass(frozen=True)
class ConfusionMatrix:
    labelset: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]  # indexed [gold][predicted]

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.counts)

    def index(self, label: str) -> int:
        return self.labelset.index(label)

    def support(self, label: str) -> int:
        return sum(self.counts[self.index(label)])

    def predicted_count(self, label: str) -> int:
        j = self.index(label)
        return sum(row[j] for row in self.counts)

    def diagonal(self, label: str) -> int:
        i = self.index(label)
        return self.counts[i][i]

    def to_json(self) -> dict:
        return {"labelset": list(self.labelset), "counts": [list(r) for r in self.counts]}


def confusion(
    pairs: Sequence[tuple[str, str]],
    labelset: Sequence[str],
) -> ConfusionMatrix:
    index = {label: i for i, label in enumerate(labelset)}
    counts = [[0] * len(labelset) for _ in labelset]
    for gold, predicted in pairs:
        if gold not in index:
            raise ValueError(f"gold label {gold!r} not in labelset")
        if predicted not in index:
            raise ValueError(f"predicted label {predicted!r} not in labelset")
        counts[index[gold]][index[predicted]] += 1
    return ConfusionMatrix(
        labelset=tuple(labelset),
        counts=tuple(tuple(row) for row in counts),
    )


def row_normalize(cm: ConfusionMatrix) -> list[list[float]]:
    """Each supported row sums to 1; zero-support rows stay all zeros."""
    out = []
    for row in cm.counts:
        total = sum(row)
        if total == 0:
            out.append([0.0] * len(row))
        else:
            out.append([c / total for c in row])
    return out


@dataclass(frozen=True)
class PerLabelMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


@dataclass(frozen=True)
class MacroTriple:
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class MetricsReport:
    per_label: tuple[PerLabelMetrics, ...]
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro: MacroTriple
    macro_excl: dict[str, MacroTriple]  # excluded label -> macro without it
    n: int
    metadata: dict = field(default_factory=dict)

    def per_label_map(self) -> dict[str, PerLabelMetrics]:
        return {m.label: m for m in self.per_label}

    def to_json(self) -> dict:
        return {
            "per_label": [m.to_json() for m in self.per_label],
            "micro": {
                "precision": self.micro_precision,
                "recall": self.micro_recall,
                "f1": self.micro_f1,
            },
            "macro": self.macro.to_json(),
            "macro_excl": {k: v.to_json() for k, v in self.macro_excl.items()},
            "n": self.n,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MetricsReport":
        return cls(
            per_label=tuple(
                PerLabelMetrics(
                    label=m["label"],
                    precision=m["precision"],
                    recall=m["recall"],
                    f1=m["f1"],
                    support=m["support"],
                )
                for m in obj["per_label"]
            ),
            micro_precision=obj["micro"]["precision"],
            micro_recall=obj["micro"]["recall"],
            micro_f1=obj["micro"]["f1"],
            macro=MacroTriple(**obj["macro"]),
            macro_excl={k: MacroTriple(**v) for k, v in obj["macro_excl"].items()},
            n=obj["n"],
            metadata=obj.get("metadata", {}),
        )


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _macro_over(metrics: Sequence[PerLabelMetrics], skip: set[str]) -> MacroTriple:
    rows = [m for m in metrics if m.support > 0 and m.label not in skip]
    if not rows:
        return MacroTriple(0.0, 0.0, 0.0)
    k = len(rows)
    return MacroTriple(
        precision=sum(m.precision for m in rows) / k,
        recall=sum(m.recall for m in rows) / k,
        f1=sum(m.f1 for m in rows) / k,
    )


def report(
    cm: ConfusionMatrix,
    excl: Optional[set[str]] = None,
) -> MetricsReport:
    """Derive a full metrics report from confusion matrix margins."""
    if excl is None:
        excl = {"spos-"}
    per_label = []
    for label in cm.labelset:
        tp = cm.diagonal(label)
        p = _safe_div(tp, cm.predicted_count(label))
        r = _safe_div(tp, cm.support(label))
        per_label.append(
            PerLabelMetrics(label=label, precision=p, recall=r, f1=_f1(p, r), support=cm.support(label))
        )
    n = cm.n
    correct = sum(cm.diagonal(label) for label in cm.labelset)
    micro = _safe_div(correct, n)
    return MetricsReport(
        per_label=tuple(per_label),
        micro_precision=micro,
        micro_recall=micro,
        micro_f1=micro,
        macro=_macro_over(per_label, set()),
        macro_excl={label: _macro_over(per_label, {label}) for label in excl},
        n=n,
        metadata={"macro_support_policy": "per-report supported labels"},
    )


def average_folds(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Unweighted mean of every metric field; supports summed."""
    if not reports:
        raise ValueError("cannot average an empty report list")
    labels = [m.label for m in reports[0].per_label]
    for rep in reports:
        if [m.label for m in rep.per_label] != labels:
            raise ValueError("reports do not share a labelset")
    k = len(reports)
    per_label = []
    for i, label in enumerate(labels):
        rows = [rep.per_label[i] for rep in reports]
        p = sum(m.precision for m in rows) / k
        r = sum(m.recall for m in rows) / k
        f = sum(m.f1 for m in rows) / k
        per_label.append(
            PerLabelMetrics(label=label, precision=p, recall=r, f1=f,
                            support=sum(m.support for m in rows))
        )
    excl_keys = set(reports[0].macro_excl)

    def mean_triple(triples: Sequence[MacroTriple]) -> MacroTriple:
        return MacroTriple(
            precision=sum(t.precision for t in triples) / k,
            recall=sum(t.recall for t in triples) / k,
            f1=sum(t.f1 for t in triples) / k,
        )

    return MetricsReport(
        per_label=tuple(per_label),
        micro_precision=sum(r.micro_precision for r in reports) / k,
        micro_recall=sum(r.micro_recall for r in reports) / k,
        micro_f1=sum(r.micro_f1 for r in reports) / k,
        macro=mean_triple([r.macro for r in reports]),
        macro_excl={
            key: mean_triple([r.macro_excl[key] for r in reports]) for key in excl_keys
        },
        n=sum(r.n for r in reports),
        metadata={"averaged_folds": k},
    )


def render_report(rep: MetricsReport) -> str:
    """Aligned plain-text table for terminal display."""
    lines = []
    header = f"{'label':<10} {'prec':>7} {'recall':>7} {'f1':>7} {'support':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for m in rep.per_label:
        lines.append(
            f"{m.label:<10} {m.precision:>7.3f} {m.recall:>7.3f} {m.f1:>7.3f} {m.support:>8d}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'micro':<10} {rep.micro_precision:>7.3f} {rep.micro_recall:>7.3f} "
        f"{rep.micro_f1:>7.3f} {rep.n:>8d}"
    )
    lines.append(
        f"{'macro':<10} {rep.macro.precision:>7.3f} {rep.macro.recall:>7.3f} "
        f"{rep.macro.f1:>7.3f} {'':>8}"
    )
    for label, triple in sorted(rep.macro_excl.items()):
        name = f"macro -{label}"
        lines.append(
            f"{name:<10} {triple.precision:>7.3f} {triple.recall:>7.3f} "
            f"{triple.f1:>7.3f} {'':>8}"
        )
    return "\n".join(lines)


def render_confusion(cm: ConfusionMatrix, normalized: bool = False) -> str:
    rows = row_normalize(cm) if normalized else cm.counts
    width = max(7, max(len(l) for l in cm.labelset) + 1)
    out = [" " * width + "".join(f"{l:>{width}}" for l in cm.labelset)]
    for label, row in zip(cm.labelset, rows):
        if normalized:
            cells = "".join(f"{v:>{width}.3f}" for v in row)
        else:
            cells = "".join(f"{v:>{width}d}" for v in row)
        out.append(f"{label:<{width}}" + cells)
    return "\n".join(out)
