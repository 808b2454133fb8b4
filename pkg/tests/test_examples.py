import io
import re

import pytest

from conftest import corpus_from_records, utt
from facetag.examples import (
    ExampleVariant,
    MissingAnnotationError,
    MixPlan,
    build_examples,
    mix_multitask,
    read_examples_jsonl,
    sample_conversations,
    write_examples_jsonl,
)


def paper_style_dialog():
    # Three-turn opening of a persuasion dialog with SWDA-style tags.
    return corpus_from_records([
        utt("c1", 0, "ER", "Are you interested in donating?",
            face_act="hneg-", dialog_act="Yes-No-Question"),
        utt("c1", 1, "EE", "Possibly, I'm not sure.",
            face_act="other", dialog_act="Hedge"),
        utt("c1", 2, "EE", "I don't even know what the charity is.",
            face_act="sneg+", dialog_act="Statement-non-opinion"),
    ])


def test_fos_third_turn_renders_two_context_lines():
    examples = build_examples(paper_style_dialog(), ExampleVariant.FOS)
    third = [e for e in examples if e.id == "c1:2"][0]
    assert third.input == (
        "ER: Are you interested in donating?\n"
        "EE: Possibly, I'm not sure.\n"
        "EE: I don't even know what the charity is."
    )
    assert third.target == "sneg+"


def test_ta_appends_tag_to_every_line():
    examples = build_examples(paper_style_dialog(), ExampleVariant.TA)
    third = [e for e in examples if e.id == "c1:2"][0]
    assert third.input == (
        "ER: Are you interested in donating? (Yes-No-Question)\n"
        "EE: Possibly, I'm not sure. (Hedge)\n"
        "EE: I don't even know what the charity is. (Statement-non-opinion)"
    )


def test_first_turn_has_no_context():
    examples = build_examples(paper_style_dialog(), ExampleVariant.FOS)
    first = [e for e in examples if e.id == "c1:0"][0]
    assert "\n" not in first.input


def test_mtl_prefix():
    examples = build_examples(paper_style_dialog(), ExampleVariant.MTL_FA)
    assert all(e.input.startswith("face acts:\n") for e in examples)
    examples = build_examples(paper_style_dialog(), ExampleVariant.MTL_DA)
    assert all(e.input.startswith("dialog acts:\n") for e in examples)
    assert [e.target for e in examples] == [
        "Yes-No-Question", "Hedge", "Statement-non-opinion",
    ]


def test_ta_without_dialog_acts_errors():
    corpus = corpus_from_records([utt("c1", 0, face_act="other")])
    with pytest.raises(MissingAnnotationError, match="c1"):
        build_examples(corpus, ExampleVariant.TA)


def test_line_count_bounds(fixture_corpus):
    for context_size in (0, 1, 2, 4):
        for ex in build_examples(fixture_corpus, ExampleVariant.FOS, context_size):
            lines = ex.input.split("\n")
            assert len(lines) <= context_size + 1
            _, _, turn = ex.id.rpartition(":")
            assert len(lines) - 1 == min(int(turn), context_size)


def test_final_line_is_target_utterance(fixture_corpus):
    by_id = {
        f"{c.id}:{u.turn}": u
        for c in fixture_corpus.conversations for u in c.utterances
    }
    for ex in build_examples(fixture_corpus, ExampleVariant.FOS):
        last = ex.input.split("\n")[-1]
        utt_ = by_id[ex.id]
        assert last == f"{utt_.speaker.value}: {utt_.text}"


def test_ta_with_tags_stripped_equals_fos(fixture_corpus):
    fos = {e.id: e.input for e in build_examples(fixture_corpus, ExampleVariant.FOS)}
    ta = build_examples(fixture_corpus, ExampleVariant.TA)
    strip = re.compile(r" \([^()]*\)$", re.MULTILINE)
    for ex in ta:
        assert strip.sub("", ex.input) == fos[ex.id]


def test_context_never_crosses_conversations(fixture_corpus):
    for ex in build_examples(fixture_corpus, ExampleVariant.FOS, context_size=30):
        cid, _, turn = ex.id.rpartition(":")
        assert len(ex.input.split("\n")) == int(turn) + 1


class TestMix:
    def da_corpus(self, n=10, turns=3):
        records = []
        for c in range(n):
            for t in range(turns):
                records.append(
                    utt(f"d{c}", t, "ER", f"utterance {c} {t}", dialog_act="Statement")
                )
        return corpus_from_records(records)

    def fa_examples(self, fixture_corpus):
        return build_examples(fixture_corpus, ExampleVariant.MTL_FA)

    def test_fraction_one_includes_everything(self, fixture_corpus):
        fa = self.fa_examples(fixture_corpus)
        da = self.da_corpus()
        mixed = mix_multitask(fa, da, MixPlan(sample_fraction=1.0, seed=1))
        da_ids = {e.id for e in mixed if e.variant is ExampleVariant.MTL_DA}
        assert len(da_ids) == da.num_utterances()
        assert len(mixed) == len(fa) + da.num_utterances()

    def test_ten_percent_of_ten_is_one_and_deterministic(self, fixture_corpus):
        fa = self.fa_examples(fixture_corpus)
        da = self.da_corpus(n=10)
        plan = MixPlan(sample_fraction=0.10, seed=7)
        a = mix_multitask(fa, da, plan)
        b = mix_multitask(fa, da, plan)
        assert a == b
        chosen = {e.id.split(":")[0] for e in a if e.variant is ExampleVariant.MTL_DA}
        assert len(chosen) == 1

    def test_zero_sample_errors(self, fixture_corpus):
        fa = self.fa_examples(fixture_corpus)
        da = self.da_corpus(n=3)
        with pytest.raises(ValueError, match="zero"):
            mix_multitask(fa, da, MixPlan(sample_fraction=0.1, seed=1))

    def test_sampling_is_by_whole_conversation(self):
        da = self.da_corpus(n=10, turns=4)
        chosen = sample_conversations(da, MixPlan(sample_fraction=0.3, seed=2))
        assert len(chosen) == 3
        for conv in chosen:
            assert len(conv.utterances) == 4

    def test_shuffle_depends_only_on_seed(self, fixture_corpus):
        fa = self.fa_examples(fixture_corpus)
        da = self.da_corpus()
        m1 = mix_multitask(fa, da, MixPlan(sample_fraction=0.5, seed=3))
        m2 = mix_multitask(list(reversed(fa)), da, MixPlan(sample_fraction=0.5, seed=3))
        assert m1 == m2


def test_examples_jsonl_round_trip(fixture_corpus):
    examples = build_examples(fixture_corpus, ExampleVariant.FOS)
    buf = io.StringIO()
    write_examples_jsonl(examples, buf)
    assert read_examples_jsonl(io.StringIO(buf.getvalue())) == examples
