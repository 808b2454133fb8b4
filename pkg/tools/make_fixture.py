"""Regenerate the synthetic corpus fixture at tests/data/fixture_corpus.jsonl.

The fixture is deterministic: 25 conversations of 16 turns across 5 folds
with a fixed label histogram and label-correlated wording, so the naive
Bayes baseline has learnable signal. Run from the repository root:

    python3 tools/make_fixture.py
"""

import json
import random
from pathlib import Path

SEED = 20240517
N_CONVERSATIONS = 25
TURNS_PER_CONVERSATION = 16
N_FOLDS = 5

# Frozen histogram; tests assert these exact counts.
LABEL_COUNTS = {
    "other": 162,
    "hpos+": 106,
    "spos+": 60,
    "hneg-": 40,
    "hpos-": 14,
    "hneg+": 10,
    "sneg+": 7,
    "spos-": 1,
    "sneg-": 0,
}

PHRASES = {
    "other": [
        "okay let me think about it",
        "hmm alright then",
        "the weather here is nice today",
        "i see what you mean",
        "let me check my balance first",
        "one moment please",
    ],
    "hpos+": [
        "thank you so much for your time",
        "i totally agree with you",
        "that is a great point honestly",
        "we are on the same page here",
        "thanks that really helps",
    ],
    "spos+": [
        "i donate to charity every month",
        "i always volunteer at the shelter",
        "i am known for being generous",
        "i make large donations regularly",
    ],
    "hneg-": [
        "would you consider donating today",
        "can you tell me more about the charity",
        "could you give part of your bonus",
        "will you pledge a dollar now",
        "please send the money before friday",
    ],
    "hpos-": [
        "that claim seems wrong to me",
        "i doubt this charity is legitimate",
        "your numbers do not add up",
    ],
    "hneg+": [
        "feel free to skip the donation",
        "no pressure either way of course",
        "you can decide whenever you like",
    ],
    "sneg+": [
        "i would rather keep my earnings",
        "i prefer not to donate this time",
        "i must decline the request",
    ],
    "spos-": [
        "my mistake sorry about that",
    ],
    "sneg-": [],
}

FILLER = ["well", "so", "anyway", "right", "yeah", "look", "honestly", "truly"]

# Dialog act assignment: (tag, weight) per label; questions concentrate on
# imposition turns so the correlation analysis has planted signal.
DIALOG_ACTS = {
    "hneg-": [("Question", 9), ("Statement", 1)],
    "other": [("Statement", 6), ("BackChannel", 2), ("FloorGrabber", 1), ("Disruption", 1)],
    "hpos+": [("Statement", 9), ("BackChannel", 1)],
    "spos+": [("Statement", 10)],
    "hpos-": [("Statement", 9), ("Disruption", 1)],
    "hneg+": [("Statement", 10)],
    "sneg+": [("Statement", 10)],
    "spos-": [("Statement", 10)],
}


def weighted_choice(rng, pairs):
    total = sum(w for _, w in pairs)
    roll = rng.random() * total
    acc = 0.0
    for value, weight in pairs:
        acc += weight
        if roll < acc:
            return value
    return pairs[-1][0]


def main():
    rng = random.Random(SEED)
    labels = [l for l, n in LABEL_COUNTS.items() for _ in range(n)]
    assert len(labels) == N_CONVERSATIONS * TURNS_PER_CONVERSATION
    rng.shuffle(labels)

    out = Path(__file__).resolve().parent.parent / "tests" / "data" / "fixture_corpus.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    records = []
    idx = 0
    for c in range(N_CONVERSATIONS):
        cid = f"conv{c + 1:02d}"
        fold = c % N_FOLDS
        speaker = "ER"
        for turn in range(TURNS_PER_CONVERSATION):
            label = labels[idx]
            idx += 1
            phrase = rng.choice(PHRASES[label])
            text = f"{rng.choice(FILLER)} {phrase}"
            records.append(
                {
                    "conversation_id": cid,
                    "turn": turn,
                    "speaker": speaker,
                    "text": text,
                    "face_act": label,
                    "dialog_act": weighted_choice(rng, DIALOG_ACTS[label]),
                    "fold": fold,
                }
            )
            if rng.random() < 0.6:
                speaker = "EE" if speaker == "ER" else "ER"

    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} utterances to {out}")


if __name__ == "__main__":
    main()
