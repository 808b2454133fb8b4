"""Label repair and the native baseline classifier.

Repair maps an arbitrary generated string onto the nearest valid label by
unit-cost character Levenshtein distance over the lowercased, trimmed
string. Ties go to the label with the highest training frequency among
the tied candidates, then to labelset order.

The baseline is a multinomial naive Bayes classifier over the input text,
a desk-scale stand-in for a fine-tuned neural model.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import IO, Mapping, Optional, Sequence

from .examples import Example


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert / delete / substitute)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@dataclass(frozen=True)
class PredictionRecord:
    example_id: str
    raw: str
    label: str
    distance: int
    repaired: bool
    tie_broken: bool

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "raw": self.raw,
            "label": self.label,
            "distance": self.distance,
            "repaired": self.repaired,
            "tie_broken": self.tie_broken,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PredictionRecord":
        return cls(
            example_id=obj["example_id"],
            raw=obj["raw"],
            label=obj["label"],
            distance=int(obj["distance"]),
            repaired=bool(obj["repaired"]),
            tie_broken=bool(obj["tie_broken"]),
        )


def repair_label(
    raw: str,
    labelset: Sequence[str],
    train_freqs: Optional[Mapping[str, int]] = None,
    example_id: str = "",
) -> PredictionRecord:
    """Snap a raw output string to the closest member of the labelset."""
    if not labelset:
        raise ValueError("labelset is empty")
    freqs = train_freqs or {}
    normalized = raw.strip().lower()
    distances = [levenshtein(normalized, label) for label in labelset]
    best = min(distances)
    tied = [label for label, d in zip(labelset, distances) if d == best]
    # Highest training frequency wins among the tied candidates; labelset
    # order is the final deterministic tiebreak.
    label = max(tied, key=lambda l: (freqs.get(l, 0), -labelset.index(l)))
    return PredictionRecord(
        example_id=example_id,
        raw=raw,
        label=label,
        distance=best,
        repaired=(raw != label),
        tie_broken=(len(tied) > 1),
    )


_TOKEN_RE = re.compile(r"\w+")


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens, split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class BaselineModel:
    """Multinomial naive Bayes with additive smoothing."""

    labelset: tuple[str, ...]
    alpha: float
    priors: dict[str, float]           # empirical label frequencies
    token_counts: dict[str, dict[str, int]]  # label -> token -> count
    total_tokens: dict[str, int]       # label -> token total
    vocabulary: frozenset[str]

    def log_likelihood(self, label: str, token: str) -> float:
        counts = self.token_counts[label]
        num = counts.get(token, 0) + self.alpha
        den = self.total_tokens[label] + self.alpha * len(self.vocabulary)
        return math.log(num / den)

    def log_posteriors(self, text: str) -> dict[str, float]:
        """Unnormalized log posteriors; unseen-vocabulary tokens are ignored."""
        tokens = [t for t in tokenize(text) if t in self.vocabulary]
        out = {}
        for label in self.labelset:
            score = math.log(self.priors[label]) if self.priors[label] > 0 else -math.inf
            for token in tokens:
                score += self.log_likelihood(label, token)
            out[label] = score
        return out

    def predict(self, text: str) -> str:
        scores = self.log_posteriors(text)
        # Tie goes to the higher prior, then to labelset order.
        return max(
            self.labelset,
            key=lambda l: (scores[l], self.priors[l], -self.labelset.index(l)),
        )

    def train_freqs(self) -> dict[str, int]:
        return {l: round(self.priors[l] * self._n) for l in self.labelset}

    @property
    def _n(self) -> int:
        return self.__dict__.get("_n_examples", 0)

    def to_json(self) -> dict:
        return {
            "labelset": list(self.labelset),
            "alpha": self.alpha,
            "priors": self.priors,
            "token_counts": self.token_counts,
            "total_tokens": self.total_tokens,
            "vocabulary": sorted(self.vocabulary),
            "n_examples": self._n,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BaselineModel":
        model = cls(
            labelset=tuple(obj["labelset"]),
            alpha=float(obj["alpha"]),
            priors=dict(obj["priors"]),
            token_counts={l: dict(c) for l, c in obj["token_counts"].items()},
            total_tokens=dict(obj["total_tokens"]),
            vocabulary=frozenset(obj["vocabulary"]),
        )
        model.__dict__["_n_examples"] = int(obj.get("n_examples", 0))
        return model


def train_baseline(examples: Sequence[Example], alpha: float = 1.0) -> BaselineModel:
    if not examples:
        raise ValueError("cannot train on an empty example list")
    labelset = tuple(dict.fromkeys(ex.target for ex in examples))
    label_counts = {l: 0 for l in labelset}
    token_counts: dict[str, dict[str, int]] = {l: {} for l in labelset}
    total_tokens = {l: 0 for l in labelset}
    vocab: set[str] = set()
    for ex in examples:
        label_counts[ex.target] += 1
        for token in tokenize(ex.input):
            vocab.add(token)
            token_counts[ex.target][token] = token_counts[ex.target].get(token, 0) + 1
            total_tokens[ex.target] += 1
    if not vocab:
        raise ValueError("training produced an empty vocabulary")
    n = len(examples)
    model = BaselineModel(
        labelset=labelset,
        alpha=alpha,
        priors={l: label_counts[l] / n for l in labelset},
        token_counts=token_counts,
        total_tokens=total_tokens,
        vocabulary=frozenset(vocab),
    )
    model.__dict__["_n_examples"] = n
    return model


@dataclass(frozen=True)
class RawPrediction:
    example_id: str
    output: str


def predict_baseline(model: BaselineModel, input: str, example_id: str = "") -> RawPrediction:
    return RawPrediction(example_id=example_id, output=model.predict(input))


def save_baseline(model: BaselineModel, stream: IO[str]) -> None:
    json.dump(model.to_json(), stream, sort_keys=True)


def load_baseline(stream: IO[str]) -> BaselineModel:
    return BaselineModel.from_json(json.load(stream))
