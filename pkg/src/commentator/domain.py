"""Shared data model: sentences, tokens, tagsets, annotations, accounts.

Everything here is an immutable value and every operation is a pure
function, so instances can be freely shared between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

# Task identifiers (wire/CSV values).
TASK_LID = "lid"
TASK_POS = "pos"
TASK_MLI = "mli"
TASKS = (TASK_LID, TASK_POS, TASK_MLI)
TOKEN_TASKS = (TASK_LID, TASK_POS)

# Label vocabularies.  LID is fixed; POS is the 14-tag social-media set
# (X covers foreign words, typos and abbreviations); MLI defaults to
# hi/en/other but is configurable per deployment.
LID_TAGS = ("hi", "en", "un")
POS_TAGS = (
    "NOUN", "PROPN", "VERB", "ADJ", "ADV", "ADP", "PRON",
    "DET", "CONJ", "PART", "PRON_WH", "PART_NEG", "NUM", "X",
)
DEFAULT_MLI_TAGS = ("hi", "en", "other")

LID_UNIDENTIFIED = "un"


class UnknownTagError(ValueError):
    """A tag that is not part of the tagset it was used against."""


class UnknownTaskError(ValueError):
    """A task identifier outside lid/pos/mli."""


class ValidationError(ValueError):
    """An annotation payload that violates the domain invariants.

    Carries every violation found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Token:
    """One whitespace-delimited surface form of a sentence."""

    index: int
    surface: str


@dataclass(frozen=True)
class TagSet:
    """Closed label vocabulary for one task; tag order fixes the cycle order."""

    task: str
    tags: tuple[str, ...]

    def __post_init__(self):
        if self.task not in TASKS:
            raise UnknownTaskError(f"unknown task: {self.task!r}")
        if not self.tags:
            raise ValueError("tagset must not be empty")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("tagset tags must be unique")

    def __contains__(self, tag: str) -> bool:
        return tag in self.tags


LID_TAGSET = TagSet(TASK_LID, LID_TAGS)
POS_TAGSET = TagSet(TASK_POS, POS_TAGS)


def mli_tagset(tags=DEFAULT_MLI_TAGS) -> TagSet:
    """MLI tagset for a configured language list (default hi/en/other)."""
    return TagSet(TASK_MLI, tuple(tags))


@dataclass(frozen=True)
class Sentence:
    """An uploaded source sentence with its token list and cached suggestions.

    ``preannotations`` maps a token task ("lid"/"pos") to one suggested tag
    per token; the cache is filled at import time so serving an assignment
    never recomputes suggestions.
    """

    id: int
    text: str
    tokens: tuple[Token, ...]
    preannotations: dict = field(default_factory=dict)
    created_at: str = ""

    @classmethod
    def create(cls, sentence_id: int, text: str, preannotations=None,
               created_at: str = "") -> "Sentence":
        if sentence_id <= 0:
            raise ValueError("sentence id must be a positive integer")
        if not text.strip():
            raise ValueError("sentence text must be non-empty")
        return cls(
            id=sentence_id,
            text=text,
            tokens=tuple(tokenize(text)),
            preannotations=dict(preannotations or {}),
            created_at=created_at,
        )

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]


@dataclass(frozen=True)
class TokenAnnotation:
    """Per-annotator labelling of every token of a sentence for lid or pos."""

    sentence_id: int
    annotator_id: int
    task: str
    tags: tuple[str, ...]
    feedback: str | None = None
    version: int = 1
    timestamp: str = ""


@dataclass(frozen=True)
class MatrixAnnotation:
    """Per-annotator sentence-level matrix language choice."""

    sentence_id: int
    annotator_id: int
    matrix_language: str
    feedback: str | None = None
    version: int = 1
    timestamp: str = ""

    task: str = TASK_MLI


@dataclass(frozen=True)
class AnnotatorAccount:
    """A user of the platform; ``credential`` is a salted iterated hash,
    never a plaintext password."""

    annotator_id: int
    username: str
    credential: str
    role: str  # "annotator" | "admin"
    created_at: str = ""


@dataclass(frozen=True)
class Feedback:
    """Free-text issue report attached to one annotation submission."""

    sentence_id: int
    annotator_id: int
    task: str
    text: str
    timestamp: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("feedback text must be non-empty")


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into maximal runs of non-whitespace characters.

    Punctuation stays attached to its token; joining the surfaces with
    single spaces and re-splitting reproduces the same tokens.
    """
    return [Token(i, surface) for i, surface in enumerate(text.split())]


def validate_annotation(annotation, sentence: Sentence, tagset: TagSet) -> list[str]:
    """Check an annotation against its sentence and tagset.

    Returns the list of violations; an empty list means the annotation is
    valid.  Violations are data, not faults: every problem is reported,
    not just the first.
    """
    violations = []
    if isinstance(annotation, MatrixAnnotation):
        if tagset.task != TASK_MLI:
            violations.append(
                f"wrong task: matrix annotation validated against {tagset.task!r} tagset")
        if annotation.matrix_language not in tagset:
            violations.append(f"unknown tag: {annotation.matrix_language!r}")
        return violations

    if annotation.task != tagset.task:
        violations.append(
            f"wrong task: annotation task {annotation.task!r} does not match "
            f"tagset task {tagset.task!r}")
    if len(annotation.tags) != len(sentence.tokens):
        violations.append(
            f"length mismatch: {len(annotation.tags)} tags for "
            f"{len(sentence.tokens)} tokens")
    for tag in annotation.tags:
        if tag not in tagset:
            violations.append(f"unknown tag: {tag!r}")
    return violations


def cycle_tag(current: str, tagset: TagSet) -> str:
    """Next tag in tagset order, wrapping from the last back to the first.

    Applying this |tagset| times returns the starting tag, which is what
    the click-to-cycle buttons in the UI rely on.
    """
    try:
        i = tagset.tags.index(current)
    except ValueError:
        raise UnknownTagError(f"{current!r} is not in the {tagset.task} tagset") from None
    return tagset.tags[(i + 1) % len(tagset.tags)]


def utc_now_rfc3339() -> str:
    """Current UTC time as RFC 3339 with millisecond precision."""
    return format_rfc3339_ms(datetime.now(timezone.utc))


def format_rfc3339_ms(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"
