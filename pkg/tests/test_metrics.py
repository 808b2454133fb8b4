import random
from collections import Counter

import pytest

from facetag.labels import FACE_ACT_LABELSET
from facetag.metrics import (
    MetricsReport,
    average_folds,
    confusion,
    render_confusion,
    render_report,
    report,
    row_normalize,
)


def brute_metrics(pairs, labelset):
    """Independent counter-based oracle for per-label P/R/F1 and accuracy."""
    tp = Counter()
    gold_count = Counter()
    pred_count = Counter()
    for g, p in pairs:
        gold_count[g] += 1
        pred_count[p] += 1
        if g == p:
            tp[g] += 1
    out = {}
    for label in labelset:
        prec = tp[label] / pred_count[label] if pred_count[label] else 0.0
        rec = tp[label] / gold_count[label] if gold_count[label] else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[label] = (prec, rec, f1, gold_count[label])
    accuracy = sum(tp.values()) / len(pairs) if pairs else 0.0
    return out, accuracy


class TestConfusion:
    def test_all_correct_is_diagonal(self):
        pairs = [("a", "a"), ("b", "b"), ("a", "a")]
        cm = confusion(pairs, ["a", "b"])
        assert cm.counts == ((2, 0), (0, 1))

    def test_hand_counts(self):
        pairs = [("a", "b"), ("a", "b"), ("a", "a"), ("b", "b")]
        cm = confusion(pairs, ["a", "b"])
        assert cm.counts == ((1, 2), (0, 1))

    def test_label_outside_labelset(self):
        with pytest.raises(ValueError, match="not in labelset"):
            confusion([("a", "z")], ["a", "b"])

    def test_total_equals_scored(self):
        pairs = [("a", "b")] * 7
        assert confusion(pairs, ["a", "b"]).n == 7


class TestRowNormalize:
    def test_hand_case(self):
        cm = confusion(
            [("a", "b"), ("a", "b"), ("a", "a"), ("b", "b")], ["a", "b"]
        )
        assert row_normalize(cm) == [[1 / 3, 2 / 3], [0.0, 1.0]]

    def test_zero_support_row_is_zero(self):
        cm = confusion([("a", "a")], ["a", "b"])
        rows = row_normalize(cm)
        assert rows[1] == [0.0, 0.0]

    def test_supported_rows_sum_to_one(self):
        rng = random.Random(4)
        labels = list("abcd")
        pairs = [(rng.choice(labels), rng.choice(labels)) for _ in range(200)]
        cm = confusion(pairs, labels)
        for row in row_normalize(cm):
            if any(row):
                assert abs(sum(row) - 1.0) < 1e-9


class TestReport:
    def test_perfect(self):
        cm = confusion([("a", "a"), ("b", "b")], ["a", "b"])
        rep = report(cm, excl=set())
        assert rep.micro_f1 == 1.0
        assert rep.macro.f1 == 1.0
        assert all(m.f1 == 1.0 for m in rep.per_label)

    def test_hand_computed(self):
        cm = confusion(
            [("a", "b"), ("a", "b"), ("a", "a"), ("b", "b")], ["a", "b"]
        )
        rep = report(cm, excl=set())
        assert rep.micro_f1 == 0.5
        by = rep.per_label_map()
        assert by["a"].precision == 1.0
        assert by["a"].recall == pytest.approx(1 / 3)
        assert by["a"].f1 == pytest.approx(0.5)
        assert by["b"].precision == pytest.approx(1 / 3)
        assert by["b"].recall == 1.0
        assert by["b"].f1 == pytest.approx(0.5)
        assert rep.macro.f1 == pytest.approx(0.5)

    def test_micro_equals_accuracy(self):
        rng = random.Random(11)
        for _ in range(50):
            pairs = [
                (rng.choice(FACE_ACT_LABELSET), rng.choice(FACE_ACT_LABELSET))
                for _ in range(rng.randrange(1, 300))
            ]
            cm = confusion(pairs, FACE_ACT_LABELSET)
            rep = report(cm)
            accuracy = sum(1 for g, p in pairs if g == p) / len(pairs)
            assert rep.micro_f1 == accuracy
            assert rep.micro_precision == rep.micro_recall == rep.micro_f1

    def test_margin_identities(self):
        rng = random.Random(12)
        pairs = [
            (rng.choice(FACE_ACT_LABELSET), rng.choice(FACE_ACT_LABELSET))
            for _ in range(500)
        ]
        cm = confusion(pairs, FACE_ACT_LABELSET)
        for label in FACE_ACT_LABELSET:
            diag = cm.diagonal(label)
            rep = report(cm).per_label_map()[label]
            assert rep.support == cm.support(label)
            assert rep.precision * cm.predicted_count(label) == pytest.approx(diag)
            assert rep.recall * cm.support(label) == pytest.approx(diag)

    def test_macro_over_supported_only(self):
        # Label c never appears as gold: it must not dilute the macro.
        cm = confusion([("a", "a"), ("b", "a")], ["a", "b", "c"])
        rep = report(cm, excl=set())
        supported = [m for m in rep.per_label if m.support > 0]
        assert rep.macro.f1 == pytest.approx(
            sum(m.f1 for m in supported) / len(supported)
        )

    def test_macro_excl(self):
        cm = confusion([("a", "a"), ("b", "b"), ("c", "a")], ["a", "b", "c"])
        rep = report(cm, excl={"c"})
        by = rep.per_label_map()
        assert rep.macro_excl["c"].f1 == pytest.approx((by["a"].f1 + by["b"].f1) / 2)

    def test_invariant_under_labelset_reordering(self):
        rng = random.Random(9)
        pairs = [
            (rng.choice(FACE_ACT_LABELSET), rng.choice(FACE_ACT_LABELSET))
            for _ in range(300)
        ]
        shuffled = FACE_ACT_LABELSET[::-1]
        rep1 = report(confusion(pairs, FACE_ACT_LABELSET), excl=set())
        rep2 = report(confusion(pairs, shuffled), excl=set())
        assert rep1.per_label_map() == {
            m.label: m for m in rep2.per_label
        }
        assert rep1.micro_f1 == rep2.micro_f1
        # Summation order differs, so compare within float tolerance.
        assert rep1.macro.precision == pytest.approx(rep2.macro.precision)
        assert rep1.macro.recall == pytest.approx(rep2.macro.recall)
        assert rep1.macro.f1 == pytest.approx(rep2.macro.f1)

    def test_values_in_unit_interval(self):
        rng = random.Random(10)
        pairs = [
            (rng.choice(FACE_ACT_LABELSET), rng.choice(FACE_ACT_LABELSET))
            for _ in range(100)
        ]
        rep = report(confusion(pairs, FACE_ACT_LABELSET))
        for m in rep.per_label:
            assert 0 <= m.precision <= 1 and 0 <= m.recall <= 1 and 0 <= m.f1 <= 1
        assert 0 <= rep.micro_f1 <= 1 and 0 <= rep.macro.f1 <= 1

    def test_matches_brute_force(self):
        rng = random.Random(21)
        pairs = [
            (rng.choice(FACE_ACT_LABELSET), rng.choice(FACE_ACT_LABELSET))
            for _ in range(400)
        ]
        rep = report(confusion(pairs, FACE_ACT_LABELSET))
        oracle, accuracy = brute_metrics(pairs, FACE_ACT_LABELSET)
        assert rep.micro_f1 == pytest.approx(accuracy, abs=1e-12)
        for m in rep.per_label:
            p, r, f, support = oracle[m.label]
            assert m.precision == pytest.approx(p, abs=1e-12)
            assert m.recall == pytest.approx(r, abs=1e-12)
            assert m.f1 == pytest.approx(f, abs=1e-12)
            assert m.support == support


class TestAverageFolds:
    def make_report(self, pairs):
        return report(confusion(pairs, ["a", "b"]), excl=set())

    def test_idempotent_on_identical_reports(self):
        rep = self.make_report([("a", "a"), ("b", "a")])
        avg = average_folds([rep, rep, rep])
        assert avg.micro_f1 == rep.micro_f1
        assert avg.macro == rep.macro
        assert avg.n == 3 * rep.n

    def test_micro_mean(self):
        r1 = self.make_report([("a", "a"), ("a", "a"), ("a", "a"), ("a", "b"), ("a", "b")])
        r2 = self.make_report([("a", "a")] * 4 + [("a", "b")])
        avg = average_folds([r1, r2])
        assert avg.micro_f1 == pytest.approx((0.6 + 0.8) / 2)

    def test_mean_matches_brute_force(self):
        rng = random.Random(3)
        reports = []
        for _ in range(5):
            pairs = [(rng.choice("ab"), rng.choice("ab")) for _ in range(60)]
            reports.append(self.make_report(pairs))
        avg = average_folds(reports)
        assert avg.micro_f1 == pytest.approx(
            sum(r.micro_f1 for r in reports) / 5, abs=1e-12
        )
        for i, label in enumerate(["a", "b"]):
            assert avg.per_label[i].f1 == pytest.approx(
                sum(r.per_label[i].f1 for r in reports) / 5, abs=1e-12
            )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            average_folds([])

    def test_mismatched_labelsets_rejected(self):
        r1 = self.make_report([("a", "a")])
        r2 = report(confusion([("x", "x")], ["x", "y"]), excl=set())
        with pytest.raises(ValueError, match="labelset"):
            average_folds([r1, r2])


def test_report_json_round_trip():
    cm = confusion([("a", "a"), ("b", "a"), ("b", "b")], ["a", "b"])
    rep = report(cm, excl={"b"})
    assert MetricsReport.from_json(rep.to_json()) == rep


def test_renderers_do_not_crash():
    cm = confusion([("a", "a"), ("b", "a")], ["a", "b"])
    assert "micro" in render_report(report(cm))
    assert "a" in render_confusion(cm)
    assert "1.000" in render_confusion(cm, normalized=True)
