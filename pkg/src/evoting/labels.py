"""Event classes and the IOB2 tag set.

Declaration order is canonical and is the tie-break order used everywhere
(argmax ties, vote ties, span ordering).
"""

from __future__ import annotations

from enum import Enum


class EventClass(str, Enum):
    """Medication event classes. Matching is case sensitive."""

    DISPOSITION = "Disposition"
    NO_DISPOSITION = "NoDisposition"
    UNDETERMINED = "Undetermined"

    def __str__(self) -> str:
        return self.value


EVENT_CLASSES: tuple[EventClass, ...] = tuple(EventClass)

# Span label for class-agnostic medication identification.
DRUG_LABEL = "Drug"


class BioTag(str, Enum):
    O = "O"
    B_DISPOSITION = "B-Disposition"
    I_DISPOSITION = "I-Disposition"
    B_NO_DISPOSITION = "B-NoDisposition"
    I_NO_DISPOSITION = "I-NoDisposition"
    B_UNDETERMINED = "B-Undetermined"
    I_UNDETERMINED = "I-Undetermined"

    def __str__(self) -> str:
        return self.value

    @property
    def is_begin(self) -> bool:
        return self.value.startswith("B-")

    @property
    def is_inside(self) -> bool:
        return self.value.startswith("I-")

    @property
    def event_class(self) -> EventClass | None:
        if self is BioTag.O:
            return None
        return EventClass(self.value[2:])


TAGS: tuple[BioTag, ...] = tuple(BioTag)
TAG_INDEX: dict[BioTag, int] = {tag: i for i, tag in enumerate(TAGS)}
NUM_TAGS = len(TAGS)

_BEGIN = {cls: BioTag("B-" + cls.value) for cls in EventClass}
_INSIDE = {cls: BioTag("I-" + cls.value) for cls in EventClass}


def begin_tag(cls: EventClass) -> BioTag:
    return _BEGIN[cls]


def inside_tag(cls: EventClass) -> BioTag:
    return _INSIDE[cls]


def label_sort_key(label: str) -> tuple[int, str]:
    """Canonical sort key for span labels: event classes first, Drug last."""
    for i, cls in enumerate(EVENT_CLASSES):
        if label == cls.value:
            return (i, label)
    return (len(EVENT_CLASSES), label)
