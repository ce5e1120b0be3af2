"""Append-only per-course event log.

Storage is one UTF-8 JSON-Lines file per course (``<data_dir>/<course>/events.jsonl``),
one event object per line with an explicit ``kind`` discriminator.  Encoding is
canonical (fixed key order, sorted tag lists, compact separators) so a
replayed log re-serializes byte-identically.  Unknown keys are ignored on read.
"""

from __future__ import annotations

import csv
import io
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from . import domain as d
from .errors import StorageFailure, UnknownCourse

EVENTS_FILENAME = "events.jsonl"

CSV_HEADER = ["seq", "at", "kind", "user", "question", "ku", "role", "value"]


# --- wire encoding ---------------------------------------------------------

def _question_to_obj(q: d.Question) -> dict:
    return {
        "question_id": q.question_id,
        "author_id": q.author_id,
        "body": q.body,
        "choices": list(q.choices),
        "correct_index": q.correct_index,
        "solution": q.solution,
        "tags": sorted(q.tags),
        "status": q.status.value,
        "created_at": q.created_at,
    }


def _question_from_obj(obj: dict) -> d.Question:
    return d.Question(
        question_id=obj["question_id"],
        author_id=obj["author_id"],
        body=obj["body"],
        choices=tuple(obj["choices"]),
        correct_index=obj["correct_index"],
        solution=obj["solution"],
        tags=frozenset(obj["tags"]),
        status=d.QuestionStatus(obj["status"]),
        created_at=obj["created_at"],
    )


def _body_to_obj(body: d.EventBody) -> dict:
    if isinstance(body, d.QuestionCreated):
        return {"author": body.author, "question": _question_to_obj(body.question)}
    if isinstance(body, d.AnswerSubmitted):
        return {"user": body.user, "question": body.question,
                "chosen_index": body.chosen_index, "correct": body.correct}
    if isinstance(body, d.DifficultyRated):
        return {"user": body.user, "question": body.question, "stars": body.stars}
    if isinstance(body, d.QualityRated):
        return {"user": body.user, "question": body.question, "stars": body.stars}
    if isinstance(body, d.QuestionFlagged):
        return {"user": body.user, "question": body.question, "reason": body.reason}
    if isinstance(body, d.ModerationApplied):
        obj = {"instructor": body.instructor, "question": body.question,
               "action": body.action.value}
        if body.patched is not None:
            obj["patched"] = _question_to_obj(body.patched)
        return obj
    if isinstance(body, d.PeerRequestPosted):
        return {"user": body.user, "ku": body.ku, "role": body.role.value}
    if isinstance(body, d.AvailabilitySet):
        return {"user": body.user, "slots": body.slots.indices()}
    if isinstance(body, d.PreferenceSet):
        return {"user": body.user, "role": body.role.value, "epsilon": body.epsilon}
    if isinstance(body, d.SessionRequested):
        return {"from_user": body.from_user, "to_user": body.to_user,
                "slot": body.slot, "kus": list(body.kus)}
    if isinstance(body, d.SessionResponded):
        return {"user": body.user, "session_ref": body.session_ref,
                "accepted": body.accepted}
    if isinstance(body, d.ConsentRecorded):
        return {"user": body.user, "granted": body.granted}
    raise TypeError(f"unknown event body {type(body).__name__}")


def _body_from_obj(kind: str, obj: dict) -> d.EventBody:
    if kind == "QuestionCreated":
        return d.QuestionCreated(obj["author"], _question_from_obj(obj["question"]))
    if kind == "AnswerSubmitted":
        return d.AnswerSubmitted(obj["user"], obj["question"],
                                 obj["chosen_index"], obj["correct"])
    if kind == "DifficultyRated":
        return d.DifficultyRated(obj["user"], obj["question"], obj["stars"])
    if kind == "QualityRated":
        return d.QualityRated(obj["user"], obj["question"], obj["stars"])
    if kind == "QuestionFlagged":
        return d.QuestionFlagged(obj["user"], obj["question"], obj["reason"])
    if kind == "ModerationApplied":
        patched = obj.get("patched")
        return d.ModerationApplied(obj["instructor"], obj["question"],
                                   d.ModerationAction(obj["action"]),
                                   _question_from_obj(patched) if patched else None)
    if kind == "PeerRequestPosted":
        return d.PeerRequestPosted(obj["user"], obj["ku"], d.PeerRole(obj["role"]))
    if kind == "AvailabilitySet":
        return d.AvailabilitySet(obj["user"], d.AvailabilityVector.from_indices(obj["slots"]))
    if kind == "PreferenceSet":
        return d.PreferenceSet(obj["user"], d.PeerRole(obj["role"]), obj["epsilon"])
    if kind == "SessionRequested":
        return d.SessionRequested(obj["from_user"], obj["to_user"],
                                  obj["slot"], tuple(obj["kus"]))
    if kind == "SessionResponded":
        return d.SessionResponded(obj["user"], obj["session_ref"], obj["accepted"])
    if kind == "ConsentRecorded":
        return d.ConsentRecorded(obj["user"], obj["granted"])
    raise ValueError(f"unknown event kind {kind!r}")


def encode_event(event: d.Event) -> str:
    obj = {"seq": event.seq, "at": event.at, "course": event.course,
           "kind": event.kind}
    obj.update(_body_to_obj(event.body))
    return json.dumps(obj, separators=(",", ":"))


def decode_event(line: str) -> d.Event:
    obj = json.loads(line)
    return d.Event(seq=obj["seq"], at=obj["at"], course=obj["course"],
                   body=_body_from_obj(obj["kind"], obj))


def actor_of(body: d.EventBody) -> str:
    """The user a log row belongs to, for consent filtering."""
    if isinstance(body, d.QuestionCreated):
        return body.author
    if isinstance(body, d.ModerationApplied):
        return body.instructor
    if isinstance(body, d.SessionRequested):
        return body.from_user
    return body.user


# --- derived views ---------------------------------------------------------

@dataclass(frozen=True)
class LatestAttemptMatrix:
    """Sparse user x question matrix holding each pair's most recent answer.

    ``users``/``questions`` are ordered by first appearance among answer
    events; ``entries`` maps (user_idx, question_idx) to (correct, at).
    """

    users: tuple[str, ...]
    questions: tuple[str, ...]
    entries: dict[tuple[int, int], tuple[int, d.Millis]]

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_questions(self) -> int:
        return len(self.questions)


def build_latest_attempts(events: Iterable[d.Event],
                          up_to: Optional[d.Millis] = None) -> LatestAttemptMatrix:
    users: list[str] = []
    questions: list[str] = []
    user_idx: dict[str, int] = {}
    question_idx: dict[str, int] = {}
    best: dict[tuple[int, int], tuple[d.Millis, int, int]] = {}
    for event in events:
        if up_to is not None and event.at > up_to:
            continue
        body = event.body
        if not isinstance(body, d.AnswerSubmitted):
            continue
        if body.user not in user_idx:
            user_idx[body.user] = len(users)
            users.append(body.user)
        if body.question not in question_idx:
            question_idx[body.question] = len(questions)
            questions.append(body.question)
        key = (user_idx[body.user], question_idx[body.question])
        cur = best.get(key)
        if cur is None or (event.at, event.seq) > cur[:2]:
            best[key] = (event.at, event.seq, int(body.correct))
    entries = {key: (val[2], val[0]) for key, val in best.items()}
    return LatestAttemptMatrix(tuple(users), tuple(questions), entries)


# --- the log itself --------------------------------------------------------

class CourseLog:
    """Append-only log for one course: single writer, immutable replay views."""

    def __init__(self, course_id: str, path: Path, events: list[d.Event]):
        self.course_id = course_id
        self.path = path
        self._events = events
        self._lock = threading.Lock()
        self._handle = open(path, "a", encoding="utf-8")

    @classmethod
    def open(cls, data_dir: str | Path, course_id: str, *, create: bool = False) -> "CourseLog":
        path = Path(data_dir) / course_id / EVENTS_FILENAME
        if not path.exists():
            if not create:
                raise UnknownCourse(f"no event log for course {course_id!r}")
            path.parent.mkdir(parents=True, exist_ok=True)
            path.touch()
        events = [decode_event(line) for line in path.read_text(encoding="utf-8").splitlines()
                  if line.strip()]
        return cls(course_id, path, events)

    def close(self) -> None:
        self._handle.close()

    @property
    def next_seq(self) -> int:
        return len(self._events) + 1

    @property
    def last_at(self) -> d.Millis:
        return self._events[-1].at if self._events else 0

    def append(self, body: d.EventBody, at: d.Millis, *,
               check_refs: Optional[Callable[[d.EventBody], None]] = None) -> d.Event:
        """Durably append one event; returns it with its assigned seq_no.

        ``at`` earlier than the predecessor's is clamped up to it, keeping
        timestamps non-decreasing without trusting wall clocks.
        """
        with self._lock:
            if check_refs is not None:
                check_refs(body)
            at = max(int(at), self.last_at)
            event = d.Event(seq=self.next_seq, at=at, course=self.course_id, body=body)
            try:
                self._handle.write(encode_event(event) + "\n")
                self._handle.flush()
                os.fsync(self._handle.fileno())
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc
            self._events.append(event)
            return event

    def replay(self, up_to: Optional[d.Millis] = None) -> tuple[d.Event, ...]:
        """All events with at <= up_to (all of them when absent), in seq order."""
        with self._lock:
            events = tuple(self._events)
        if up_to is None:
            return events
        return tuple(e for e in events if e.at <= up_to)

    def latest_attempts(self, up_to: Optional[d.Millis] = None) -> LatestAttemptMatrix:
        return build_latest_attempts(self.replay(up_to))

    def export_csv(self) -> str:
        """One row per event, excluding users whose latest consent is False.

        Header ``seq,at,kind,user,question,ku,role,value``; RFC-4180 quoting,
        LF line endings.  Consent is evaluated over the full log, so a later
        grant retroactively exposes a user's rows.
        """
        events = self.replay()
        consent: dict[str, bool] = {}
        for event in events:
            if isinstance(event.body, d.ConsentRecorded):
                consent[event.body.user] = event.body.granted
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for event in events:
            if consent.get(actor_of(event.body)) is False:
                continue
            writer.writerow(_csv_row(event))
        return out.getvalue()


def _csv_row(event: d.Event) -> list:
    body = event.body
    user = actor_of(body)
    question = ""
    ku = ""
    role = ""
    value = ""
    if isinstance(body, d.QuestionCreated):
        question = body.question.question_id
    elif isinstance(body, d.AnswerSubmitted):
        question, value = body.question, str(int(body.correct))
    elif isinstance(body, (d.DifficultyRated, d.QualityRated)):
        question, value = body.question, str(body.stars)
    elif isinstance(body, d.QuestionFlagged):
        question, value = body.question, body.reason
    elif isinstance(body, d.ModerationApplied):
        question, value = body.question, body.action.value
    elif isinstance(body, d.PeerRequestPosted):
        ku, role = body.ku, body.role.value
    elif isinstance(body, d.AvailabilitySet):
        value = ";".join(str(j) for j in body.slots.indices())
    elif isinstance(body, d.PreferenceSet):
        role, value = body.role.value, repr(body.epsilon)
    elif isinstance(body, d.SessionRequested):
        ku = ";".join(body.kus)
        value = f"{body.to_user}@{body.slot}"
    elif isinstance(body, d.SessionResponded):
        value = f"{body.session_ref}:{int(body.accepted)}"
    elif isinstance(body, d.ConsentRecorded):
        value = str(int(body.granted))
    return [event.seq, event.at, event.kind, user, question, ku, role, value]
