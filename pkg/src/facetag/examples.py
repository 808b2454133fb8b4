"""Build (input text, target string) examples in the four preparations.

FOS renders the target utterance with up to `context_size` preceding turns,
one "<ROLE>: <text>" line each. TA appends the dialog act tag in
parentheses to every rendered line. MTL variants prepend a task-name
prefix line so one model can serve both tagging tasks.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import IO, Optional

from .corpus import Conversation, Corpus, Utterance

TASK_FACE_ACTS = "face acts"
TASK_DIALOG_ACTS = "dialog acts"


class ExampleVariant(Enum):
    FOS = "fos"
    TA = "ta"
    MTL_FA = "mtl-fa"
    MTL_DA = "mtl-da"

    @property
    def needs_dialog_acts(self) -> bool:
        return self in (ExampleVariant.TA, ExampleVariant.MTL_DA)

    @property
    def task(self) -> str:
        return TASK_DIALOG_ACTS if self is ExampleVariant.MTL_DA else TASK_FACE_ACTS


class MissingAnnotationError(ValueError):
    def __init__(self, what: str, conversation_id: str, turn: int):
        self.conversation_id = conversation_id
        self.turn = turn
        super().__init__(
            f"{what} missing on utterance {conversation_id!r} turn {turn}"
        )


@dataclass(frozen=True)
class Example:
    id: str
    input: str
    target: str
    variant: ExampleVariant
    fold: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "input": self.input,
            "target": self.target,
            "variant": self.variant.value,
            "fold": self.fold,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Example":
        return cls(
            id=obj["id"],
            input=obj["input"],
            target=obj["target"],
            variant=ExampleVariant(obj["variant"]),
            fold=int(obj["fold"]),
        )


@dataclass(frozen=True)
class MixPlan:
    sample_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.sample_fraction <= 1.0:
            raise ValueError(f"sample_fraction must be in (0, 1]: {self.sample_fraction}")


def example_id(conversation_id: str, turn: int) -> str:
    return f"{conversation_id}:{turn}"


def _render_line(utt: Utterance, with_tag: bool) -> str:
    line = f"{utt.speaker.value}: {utt.text}"
    if with_tag:
        if utt.dialog_act is None:
            raise MissingAnnotationError("dialog act", utt.conversation_id, utt.turn)
        line += f" ({utt.dialog_act.name})"
    return line


def render_input(
    conv: Conversation,
    turn: int,
    variant: ExampleVariant,
    context_size: int = 2,
) -> str:
    """Render the input text for one target turn; context never crosses
    the conversation boundary."""
    with_tag = variant is ExampleVariant.TA
    start = max(0, turn - context_size)
    lines = [_render_line(conv.utterances[i], with_tag) for i in range(start, turn + 1)]
    text = "\n".join(lines)
    if variant in (ExampleVariant.MTL_FA, ExampleVariant.MTL_DA):
        text = f"{variant.task}:\n{text}"
    return text


def build_examples(
    corpus: Corpus,
    variant: ExampleVariant,
    context_size: int = 2,
) -> list[Example]:
    """One example per annotated utterance, in corpus order."""
    if context_size < 0:
        raise ValueError(f"context_size must be >= 0: {context_size}")
    out: list[Example] = []
    for conv in corpus.conversations:
        fold = corpus.fold_of.get(conv.id, 0)
        for utt in conv.utterances:
            if variant is ExampleVariant.MTL_DA:
                if utt.dialog_act is None:
                    raise MissingAnnotationError("dialog act", conv.id, utt.turn)
                target = utt.dialog_act.name
            else:
                if utt.face_act is None:
                    continue
                target = utt.face_act.canonical
            out.append(
                Example(
                    id=example_id(conv.id, utt.turn),
                    input=render_input(conv, utt.turn, variant, context_size),
                    target=target,
                    variant=variant,
                    fold=fold,
                )
            )
    return out


def _conv_draw(seed: int, conversation_id: str) -> float:
    # Schedule-independent per-conversation draw: hash of (seed, id).
    digest = hashlib.sha256(f"{seed}\x00{conversation_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def sample_conversations(corpus: Corpus, plan: MixPlan) -> list[Conversation]:
    """Choose floor(fraction * n) conversations uniformly without
    replacement, deterministically under the plan seed."""
    n = len(corpus.conversations)
    take = int(plan.sample_fraction * n)
    if take == 0:
        raise ValueError(
            f"sample_fraction {plan.sample_fraction} of {n} conversations yields zero"
        )
    ranked = sorted(corpus.conversations, key=lambda c: (_conv_draw(plan.seed, c.id), c.id))
    return ranked[:take]


def mix_multitask(
    fa: list[Example],
    da_corpus: Corpus,
    plan: MixPlan,
    context_size: int = 2,
) -> list[Example]:
    """Union of the face act examples with MTL-DA examples from a sampled
    subset of dialog act conversations, shuffled under the plan seed."""
    chosen = sample_conversations(da_corpus, plan)
    sub = Corpus(
        conversations=tuple(chosen),
        fold_of={c.id: da_corpus.fold_of.get(c.id, 0) for c in chosen},
        tagset=da_corpus.tagset,
    )
    da_examples = build_examples(sub, ExampleVariant.MTL_DA, context_size)
    mixed = list(fa) + da_examples
    rng = random.Random(plan.seed)
    order = sorted(mixed, key=lambda e: e.id)
    rng.shuffle(order)
    return order


def write_examples_jsonl(examples: list[Example], stream: IO[str]) -> None:
    for ex in examples:
        stream.write(json.dumps(ex.to_json(), ensure_ascii=False))
        stream.write("\n")


def read_examples_jsonl(stream: IO[str]) -> list[Example]:
    out = []
    for line in stream:
        line = line.strip()
        if line:
            out.append(Example.from_json(json.loads(line)))
    return out
