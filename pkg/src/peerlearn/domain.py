"""Core value types for courses: users, knowledge units, questions and events.

Everything here is an immutable value; the operations are pure functions, so
types can be shared freely across threads.  Persistence and JSON encoding live
in :mod:`peerlearn.eventlog`.
"""

from __future__ import annotations

import html
import re
import uuid
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional, Union

from .errors import UnknownTag, ValidationFailed

Millis = int  # milliseconds since the Unix epoch

SLOTS_PER_WEEK = 168  # 7 days x 24 hourly blocks, slot = day*24 + hour, day 0 = Monday

MIN_TAGS = 1
MAX_TAGS = 4
MIN_CHOICES = 2
MAX_CHOICES = 6
MIN_STARS = 1
MAX_STARS = 5


class UserRole(str, Enum):
    STUDENT = "student"
    INSTRUCTOR = "instructor"


class PeerRole(str, Enum):
    """Study-session roles: provide support, seek support, or find a partner."""

    PROVIDE = "provide"
    SEEK = "seek"
    PARTNER = "partner"


class QuestionStatus(str, Enum):
    ACTIVE = "active"
    FLAGGED = "flagged"
    DELETED = "deleted"


class ModerationAction(str, Enum):
    EDIT = "edit"
    DELETE = "delete"
    RESTORE = "restore"


@dataclass(frozen=True)
class Consent:
    granted: bool
    at: Millis


@dataclass(frozen=True)
class User:
    user_id: str
    display_name: str
    role: UserRole
    course_id: str
    consent: Optional[Consent] = None


@dataclass(frozen=True)
class KnowledgeUnit:
    ku_id: str
    label: str
    ordinal: int = 0


@dataclass(frozen=True)
class Question:
    question_id: str
    author_id: str
    body: str
    choices: tuple[str, ...]
    correct_index: int
    solution: str
    tags: frozenset[str]
    status: QuestionStatus
    created_at: Millis


@dataclass(frozen=True)
class QuestionDraft:
    """Author-submitted question before validation assigns an id."""

    author_id: str
    body: str
    choices: tuple[str, ...]
    correct_index: int
    solution: str
    tags: frozenset[str]

    @classmethod
    def of(cls, author_id: str, body: str, choices: Iterable[str], correct_index: int,
           solution: str, tags: Iterable[str]) -> "QuestionDraft":
        return cls(author_id=author_id, body=body, choices=tuple(choices),
                   correct_index=correct_index, solution=solution, tags=frozenset(tags))


@dataclass(frozen=True)
class QuestionStats:
    """Aggregates over a question's answer/rating/flag events.

    ``correct_rate`` is defined only when there is at least one response, the
    two means only when at least one rating of that scale exists.
    """

    responses: int = 0
    correct_rate: Optional[float] = None
    mean_difficulty: Optional[float] = None
    mean_quality: Optional[float] = None
    flags: int = 0


@dataclass(frozen=True)
class AvailabilityVector:
    """Weekly availability as a 168-bit mask (bit j set = slot j free)."""

    mask: int = 0

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> "AvailabilityVector":
        mask = 0
        for j in indices:
            if not 0 <= j < SLOTS_PER_WEEK:
                raise ValueError(f"slot index {j} outside 0..{SLOTS_PER_WEEK - 1}")
            mask |= 1 << j
        return cls(mask)

    @classmethod
    def from_bools(cls, bits: Iterable[bool]) -> "AvailabilityVector":
        bits = list(bits)
        if len(bits) != SLOTS_PER_WEEK:
            raise ValueError(f"expected {SLOTS_PER_WEEK} slots, got {len(bits)}")
        return cls.from_indices(j for j, b in enumerate(bits) if b)

    def indices(self) -> list[int]:
        return [j for j in range(SLOTS_PER_WEEK) if self.mask >> j & 1]

    def has(self, slot: int) -> bool:
        return 0 <= slot < SLOTS_PER_WEEK and bool(self.mask >> slot & 1)

    def count(self) -> int:
        return bin(self.mask).count("1")


# --- event payloads -------------------------------------------------------

@dataclass(frozen=True)
class QuestionCreated:
    author: str
    question: Question


@dataclass(frozen=True)
class AnswerSubmitted:
    user: str
    question: str
    chosen_index: int
    correct: bool


@dataclass(frozen=True)
class DifficultyRated:
    user: str
    question: str
    stars: int


@dataclass(frozen=True)
class QualityRated:
    user: str
    question: str
    stars: int


@dataclass(frozen=True)
class QuestionFlagged:
    user: str
    question: str
    reason: str


@dataclass(frozen=True)
class ModerationApplied:
    instructor: str
    question: str
    action: ModerationAction
    patched: Optional[Question] = None  # full question after an Edit


@dataclass(frozen=True)
class PeerRequestPosted:
    user: str
    ku: str
    role: PeerRole


@dataclass(frozen=True)
class AvailabilitySet:
    user: str
    slots: AvailabilityVector


@dataclass(frozen=True)
class PreferenceSet:
    user: str
    role: PeerRole
    epsilon: float


@dataclass(frozen=True)
class SessionRequested:
    from_user: str
    to_user: str
    slot: int
    kus: tuple[str, ...]


@dataclass(frozen=True)
class SessionResponded:
    user: str
    session_ref: int  # seq_no of the SessionRequested event
    accepted: bool


@dataclass(frozen=True)
class ConsentRecorded:
    user: str
    granted: bool


EventBody = Union[
    QuestionCreated, AnswerSubmitted, DifficultyRated, QualityRated,
    QuestionFlagged, ModerationApplied, PeerRequestPosted, AvailabilitySet,
    PreferenceSet, SessionRequested, SessionResponded, ConsentRecorded,
]


@dataclass(frozen=True)
class Event:
    """One immutable log record; ``seq`` is dense from 1 within a course."""

    seq: int
    at: Millis
    course: str
    body: EventBody

    @property
    def kind(self) -> str:
        return type(self.body).__name__


# --- rich-text helpers ----------------------------------------------------

_BLOCK_RE = re.compile(r"<(script|style)\b[^>]*>.*?</\1>", re.IGNORECASE | re.DOTALL)
_EVENT_ATTR_RE = re.compile(r"\s+on[a-z]+\s*=\s*(\"[^\"]*\"|'[^']*'|[^\s>]+)", re.IGNORECASE)
_JS_URL_RE = re.compile(r"(href|src)\s*=\s*([\"']?)\s*javascript:[^\"'>\s]*\2", re.IGNORECASE)
_TAG_RE = re.compile(r"<[^>]*>")
_MEDIA_RE = re.compile(r"<(img|video|iframe|math)\b", re.IGNORECASE)


def sanitize_rich_text(text: str) -> str:
    """Strip script/style blocks, inline event handlers and javascript: URLs.

    The engine otherwise treats rich text opaquely; rendering is the client's
    concern.
    """
    text = _BLOCK_RE.sub("", text)
    text = _EVENT_ATTR_RE.sub("", text)
    text = _JS_URL_RE.sub(r"\1=\2\2", text)
    return text


def strip_markup(text: str) -> str:
    """Plain text of a rich-text block, for search and previews."""
    plain = _TAG_RE.sub(" ", text)
    plain = html.unescape(plain)
    return " ".join(plain.split())


def _has_content(rich: str) -> bool:
    return bool(strip_markup(rich)) or _MEDIA_RE.search(rich) is not None


# --- operations -----------------------------------------------------------

def validate_question(draft: QuestionDraft, *, question_id: Optional[str] = None,
                      at: Millis = 0) -> Question:
    """Validate and normalize a draft into an Active question.

    Raises :class:`ValidationFailed` carrying *all* violated rules, not just
    the first one.
    """
    errors: list[str] = []
    tags = frozenset(draft.tags)
    if len(tags) < MIN_TAGS:
        errors.append("no_tags")
    if len(tags) > MAX_TAGS:
        errors.append("too_many_tags")
    choices = tuple(sanitize_rich_text(c) for c in draft.choices)
    if len(choices) < MIN_CHOICES:
        errors.append("too_few_choices")
    if len(choices) > MAX_CHOICES:
        errors.append("too_many_choices")
    if not 0 <= draft.correct_index < len(choices):
        errors.append("bad_correct_index")
    body = sanitize_rich_text(draft.body)
    if not _has_content(body):
        errors.append("empty_body")
    solution = sanitize_rich_text(draft.solution)
    if not _has_content(solution):
        errors.append("empty_solution")
    if errors:
        raise ValidationFailed(errors)
    return Question(
        question_id=question_id or uuid.uuid4().hex[:12],
        author_id=draft.author_id,
        body=body,
        choices=choices,
        correct_index=draft.correct_index,
        solution=solution,
        tags=tags,
        status=QuestionStatus.ACTIVE,
        created_at=at,
    )


def apply_patch(question: Question, patch: dict) -> Question:
    """Re-validate ``question`` with the patched fields applied; keeps the id.

    Used by moderation edits; the returned question is Active.
    """
    draft = QuestionDraft(
        author_id=question.author_id,
        body=patch.get("body", question.body),
        choices=tuple(patch.get("choices", question.choices)),
        correct_index=patch.get("correct_index", question.correct_index),
        solution=patch.get("solution", question.solution),
        tags=frozenset(patch.get("tags", question.tags)),
    )
    patched = validate_question(draft, question_id=question.question_id,
                                at=question.created_at)
    return replace(patched, author_id=question.author_id)


def tag_weights(question: Question, space: list[KnowledgeUnit]) -> list[float]:
    """Weight vector over the knowledge space: 1/g on each of the g tagged
    units, 0 elsewhere.  Sums to exactly 1 for any valid question."""
    ids = [ku.ku_id for ku in space]
    known = set(ids)
    for tag in question.tags:
        if tag not in known:
            raise UnknownTag(f"tag {tag!r} not in knowledge space")
    g = len(question.tags)
    w = 1.0 / g
    return [w if ku_id in question.tags else 0.0 for ku_id in ids]


def aggregate_stats(question: Question, events: Iterable[Event]) -> QuestionStats:
    """Fold a question's events into :class:`QuestionStats`.

    Answers are never deduplicated; for ratings only the latest star value
    per (user, scale) counts, latest meaning greatest (at, seq).
    """
    responses = 0
    correct = 0
    flags = 0
    latest_difficulty: dict[str, tuple[Millis, int, int]] = {}
    latest_quality: dict[str, tuple[Millis, int, int]] = {}
    for event in events:
        body = event.body
        if isinstance(body, AnswerSubmitted) and body.question == question.question_id:
            responses += 1
            correct += int(body.correct)
        elif isinstance(body, DifficultyRated) and body.question == question.question_id:
            cur = latest_difficulty.get(body.user)
            if cur is None or (event.at, event.seq) > cur[:2]:
                latest_difficulty[body.user] = (event.at, event.seq, body.stars)
        elif isinstance(body, QualityRated) and body.question == question.question_id:
            cur = latest_quality.get(body.user)
            if cur is None or (event.at, event.seq) > cur[:2]:
                latest_quality[body.user] = (event.at, event.seq, body.stars)
        elif isinstance(body, QuestionFlagged) and body.question == question.question_id:
            flags += 1
    def mean(latest: dict[str, tuple[Millis, int, int]]) -> Optional[float]:
        if not latest:
            return None
        stars = [v[2] for v in latest.values()]
        return sum(stars) / len(stars)
    return QuestionStats(
        responses=responses,
        correct_rate=correct / responses if responses else None,
        mean_difficulty=mean(latest_difficulty),
        mean_quality=mean(latest_quality),
        flags=flags,
    )
