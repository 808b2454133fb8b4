"""Label inventories: face acts, speaker roles, and dialog act tagsets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


class FaceActLabel(Enum):
    """The closed nine-value face act inventory (eight acts plus Other).

    An utterance can raise (+) or threaten (-) the positive or negative
    face of the speaker (S) or hearer (H); Other marks no face act.
    """

    HNEG_MINUS = "hneg-"
    HNEG_PLUS = "hneg+"
    HPOS_MINUS = "hpos-"
    HPOS_PLUS = "hpos+"
    SNEG_MINUS = "sneg-"
    SNEG_PLUS = "sneg+"
    SPOS_MINUS = "spos-"
    SPOS_PLUS = "spos+"
    OTHER = "other"

    @property
    def canonical(self) -> str:
        return self.value

    @classmethod
    def parse(cls, s: str) -> "FaceActLabel":
        try:
            return cls(s)
        except ValueError:
            raise UnknownLabelError(s) from None


#: Canonical label ordering used everywhere a stable order is needed
#: (repair tie-breaking, confusion matrix axes, report rows).
FACE_ACT_LABELSET = [l.canonical for l in FaceActLabel]


class UnknownLabelError(ValueError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"unknown face act label: {label!r}")


class SpeakerRole(Enum):
    """ER is the persuader, EE the persuadee."""

    ER = "ER"
    EE = "EE"

    @classmethod
    def parse(cls, s: str) -> "SpeakerRole":
        try:
            return cls(s)
        except ValueError:
            raise UnknownSpeakerError(s) from None


class UnknownSpeakerError(ValueError):
    def __init__(self, speaker: str):
        self.speaker = speaker
        super().__init__(f"unknown speaker role: {speaker!r} (expected ER or EE, or add a role mapping)")


@dataclass(frozen=True)
class DialogActTag:
    name: str
    tagset_id: str = "unknown"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TagSet:
    """A registered dialog act tag inventory with an optional collapse map."""

    id: str
    tags: tuple[str, ...]
    collapse_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.tags)) != len(self.tags):
            raise ValueError(f"tagset {self.id!r} has duplicate tag names")
        for src, dst in self.collapse_map.items():
            if dst not in self.tags:
                raise ValueError(
                    f"tagset {self.id!r}: collapse target {dst!r} is not a member tag"
                )

    def __contains__(self, name: str) -> bool:
        return name in self.tags

    def tag(self, name: str) -> DialogActTag:
        if name not in self.tags:
            raise ValueError(f"tag {name!r} is not in tagset {self.id!r}")
        return DialogActTag(name, self.id)

    def collapse(self, name: str) -> str:
        return self.collapse_map.get(name, name)

    @classmethod
    def from_json(cls, obj: dict) -> "TagSet":
        return cls(
            id=obj["id"],
            tags=tuple(obj["tags"]),
            collapse_map=dict(obj.get("collapse_map", {})),
        )

    def to_json(self) -> dict:
        return {"id": self.id, "tags": list(self.tags), "collapse_map": dict(self.collapse_map)}


# The basic MRDA level as observed in practice: five tags plus a reserved
# slot for unlabeled segments. Disruption folds into Statement when the
# collapse map is applied.
MRDA_BASIC = TagSet(
    id="mrda-basic",
    tags=("BackChannel", "Disruption", "FloorGrabber", "Question", "Statement", "Unlabeled"),
    collapse_map={"Disruption": "Statement"},
)


def load_tagset_registry(path) -> dict[str, TagSet]:
    """Load tagsets from a JSON registry file (a list of tagset objects)."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    registry = {}
    for obj in data:
        ts = TagSet.from_json(obj)
        registry[ts.id] = ts
    return registry
