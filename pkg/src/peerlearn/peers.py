"""Reciprocal peer matching over roles, competency states and weekly availability.

Scoring is per ordered pair: each side gets a directional fit (a Gaussian
kernel around its preferred competency gap, scaled by availability overlap)
and the pair's reciprocal score is the harmonic mean, so either side's veto
zeroes the match.  Role eligibility is hard: providers must be more competent,
seekers less, partners within a similarity band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from .domain import AvailabilityVector, Millis, PeerRole, SLOTS_PER_WEEK
from .errors import (AlreadyResponded, NoAvailabilitySet, NoCommonSlot,
                     NotEligible, NotRecipient, SlotNotCommon)

PARTNER_TAU = 0.15  # max competency gap for partner/partner eligibility
PREF_SIGMA = 0.1  # width of the preference kernel around the preferred gap
DEFAULT_EPSILON = {PeerRole.PROVIDE: 0.2, PeerRole.SEEK: 0.2, PeerRole.PARTNER: 0.0}
KU_TIE_EPS = 1e-9  # kus scoring within this of the max all count as matched

# the only role pairings that may match, in (mine, theirs) order
COMPLEMENTARY = {
    (PeerRole.PROVIDE, PeerRole.SEEK),
    (PeerRole.SEEK, PeerRole.PROVIDE),
    (PeerRole.PARTNER, PeerRole.PARTNER),
}

_ROLE_ORDER = {PeerRole.PROVIDE: 0, PeerRole.SEEK: 1, PeerRole.PARTNER: 2}

MS_PER_HOUR = 3_600_000
MS_PER_DAY = 24 * MS_PER_HOUR
MS_PER_WEEK = SLOTS_PER_WEEK * MS_PER_HOUR
_EPOCH_WEEKDAY = 3  # 1970-01-01 was a Thursday; slot day 0 = Monday


class SessionStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    DECLINED = "declined"


@dataclass(frozen=True)
class Overlap:
    count: int
    normalized: float


@dataclass(frozen=True)
class PeerRequest:
    user: str
    ku: str
    role: PeerRole
    at: Millis
    active: bool = True


@dataclass(frozen=True)
class PeerRecommendation:
    other_user: str
    score: float
    matched_kus: tuple[str, ...]
    suggested_slot: int
    direction: tuple[PeerRole, PeerRole]  # (my role, their role)


@dataclass
class SessionRecord:
    """Lifecycle of one requested study session; id is the request event's seq."""

    session_id: int
    from_user: str
    to_user: str
    slot: int
    kus: tuple[str, ...]
    requested_at: Millis
    status: SessionStatus = SessionStatus.PENDING
    responded_at: Optional[Millis] = None
    # whether each side held an active provide request on a session ku at request time
    from_is_provider: bool = False
    to_is_provider: bool = False


@dataclass(frozen=True)
class MatchContext:
    """Immutable snapshot view the matcher scores against."""

    requests: tuple[PeerRequest, ...]  # active requests only
    availability: Mapping[str, AvailabilityVector]
    preferences: Mapping[str, Mapping[PeerRole, float]]
    states: Mapping[tuple[str, str], float]  # (user, ku) -> competency
    tau: float = PARTNER_TAU
    sigma: float = PREF_SIGMA

    def state_of(self, user: str, ku: str) -> float:
        return self.states.get((user, ku), 0.5)

    def epsilon_of(self, user: str, role: PeerRole) -> float:
        if role is PeerRole.PARTNER:
            return 0.0
        prefs = self.preferences.get(user, {})
        return prefs.get(role, DEFAULT_EPSILON[role])


def eligible(my_role: PeerRole, their_role: PeerRole, my_state: float,
             their_state: float, tau: float = PARTNER_TAU) -> bool:
    """Role-pair eligibility: provide to less competent, seek from more
    competent, partner within ``tau``; every other pairing is ineligible."""
    if (my_role, their_role) not in COMPLEMENTARY:
        return False
    if my_role is PeerRole.PROVIDE:
        return my_state > their_state
    if my_role is PeerRole.SEEK:
        return my_state < their_state
    return abs(my_state - their_state) <= tau


def availability_overlap(z: AvailabilityVector, z_other: AvailabilityVector) -> Overlap:
    """Common-slot count, normalized by the smaller side's slot count."""
    count = bin(z.mask & z_other.mask).count("1")
    normalized = count / max(1, min(z.count(), z_other.count()))
    return Overlap(count=count, normalized=normalized)


def _gap(my_role: PeerRole, my_state: float, their_state: float) -> float:
    if my_role is PeerRole.PROVIDE:
        return my_state - their_state
    if my_role is PeerRole.SEEK:
        return their_state - my_state
    return abs(my_state - their_state)


def directional_score(my_role: PeerRole, their_role: PeerRole, my_state: float,
                      their_state: float, epsilon: float,
                      z_me: AvailabilityVector, z_them: AvailabilityVector,
                      tau: float = PARTNER_TAU, sigma: float = PREF_SIGMA) -> float:
    """One side's fit: exp(-(gap - epsilon)^2 / (2 sigma^2)) times the
    normalized availability overlap."""
    if not eligible(my_role, their_role, my_state, their_state, tau):
        raise NotEligible(f"{my_role.value}->{their_role.value} not eligible")
    overlap = availability_overlap(z_me, z_them)
    if overlap.count < 1:
        raise NoCommonSlot("no common available slot")
    if my_role is PeerRole.PARTNER:
        epsilon = 0.0
    gap = _gap(my_role, my_state, their_state)
    pref_fit = math.exp(-((gap - epsilon) ** 2) / (2.0 * sigma * sigma))
    return pref_fit * overlap.normalized


def reciprocal_score(a: float, b: float) -> float:
    """Harmonic mean of the two directional scores; zero if either is zero."""
    if a == 0.0 or b == 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


def recommend_peers(user: str, k: int, ctx: MatchContext) -> list[PeerRecommendation]:
    """Top-k peers for ``user`` over all complementary active requests.

    Per candidate the score is the max reciprocal score over shared kus;
    ``matched_kus`` lists every ku within 1e-9 of that max.  Ranking is by
    score descending, ties by ascending user id; the suggested slot is the
    lowest-index common slot.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    z_me = ctx.availability.get(user)
    if z_me is None or z_me.count() == 0:
        raise NoAvailabilitySet(f"user {user!r} has no availability set")
    mine = [r for r in ctx.requests if r.user == user]
    if not mine:
        return []
    # per other user: {(ku, my_role, their_role): psi}
    scored: dict[str, dict[tuple[str, PeerRole, PeerRole], float]] = {}
    for my_req in mine:
        for other_req in ctx.requests:
            if other_req.user == user or other_req.ku != my_req.ku:
                continue
            if (my_req.role, other_req.role) not in COMPLEMENTARY:
                continue
            other = other_req.user
            z_other = ctx.availability.get(other)
            if z_other is None:
                continue
            my_state = ctx.state_of(user, my_req.ku)
            their_state = ctx.state_of(other, my_req.ku)
            if not eligible(my_req.role, other_req.role, my_state, their_state, ctx.tau):
                continue
            if availability_overlap(z_me, z_other).count < 1:
                continue
            a = directional_score(my_req.role, other_req.role, my_state, their_state,
                                  ctx.epsilon_of(user, my_req.role), z_me, z_other,
                                  ctx.tau, ctx.sigma)
            b = directional_score(other_req.role, my_req.role, their_state, my_state,
                                  ctx.epsilon_of(other, other_req.role), z_other, z_me,
                                  ctx.tau, ctx.sigma)
            psi = reciprocal_score(a, b)
            scored.setdefault(other, {})[(my_req.ku, my_req.role, other_req.role)] = psi
    recs = []
    for other, by_combo in scored.items():
        best = max(by_combo.values())
        matched = sorted({ku for (ku, _, _), psi in by_combo.items()
                          if psi >= best - KU_TIE_EPS})
        direction = min(
            ((mr, tr) for (_, mr, tr), psi in by_combo.items() if psi >= best - KU_TIE_EPS),
            key=lambda pair: (_ROLE_ORDER[pair[0]], _ROLE_ORDER[pair[1]]))
        common = ctx.availability[user].mask & ctx.availability[other].mask
        suggested = (common & -common).bit_length() - 1  # lowest set bit
        recs.append(PeerRecommendation(other_user=other, score=best,
                                       matched_kus=tuple(matched),
                                       suggested_slot=suggested,
                                       direction=direction))
    recs.sort(key=lambda r: (-r.score, r.other_user))
    return recs[:k]


def slot_popularity(ctx: MatchContext) -> list[int]:
    """Per-slot count of users holding at least one active request and
    available at that slot."""
    counts = [0] * SLOTS_PER_WEEK
    active_users = {r.user for r in ctx.requests}
    for user in active_users:
        z = ctx.availability.get(user)
        if z is None:
            continue
        for j in z.indices():
            counts[j] += 1
    return counts


# --- session lifecycle ------------------------------------------------------

def check_session_request(from_user: str, to_user: str, slot: int, kus: tuple[str, ...],
                          availability: Mapping[str, AvailabilityVector]) -> None:
    """Validate a session request; the slot must be common at request time."""
    if from_user == to_user:
        raise SlotNotCommon("cannot request a session with yourself")
    if not kus:
        raise ValueError("session must name at least one knowledge unit")
    z_from = availability.get(from_user)
    z_to = availability.get(to_user)
    if z_from is None or z_to is None or not (z_from.has(slot) and z_to.has(slot)):
        raise SlotNotCommon(f"slot {slot} not common to both users")


def check_session_response(user: str, session: SessionRecord) -> None:
    """Validate a response: only the recipient may respond, and only once."""
    if session.to_user != user:
        raise NotRecipient(f"user {user!r} is not the recipient of session "
                           f"{session.session_id}")
    if session.status is not SessionStatus.PENDING:
        raise AlreadyResponded(f"session {session.session_id} already responded")


# --- weekly slot arithmetic -------------------------------------------------

def slot_of_millis(at: Millis) -> int:
    """Weekly slot index (day*24 + hour, Monday = day 0) of a UTC timestamp."""
    weekday = (at // MS_PER_DAY + _EPOCH_WEEKDAY) % 7
    hour = at % MS_PER_DAY // MS_PER_HOUR
    return int(weekday * 24 + hour)


def next_occurrence(after: Millis, slot: int) -> Millis:
    """Start of the first occurrence of ``slot`` strictly after ``after``."""
    hour_start = after - after % MS_PER_HOUR
    delta = (slot - slot_of_millis(hour_start)) % SLOTS_PER_WEEK
    candidate = hour_start + delta * MS_PER_HOUR
    if candidate <= after:
        candidate += MS_PER_WEEK
    return candidate
