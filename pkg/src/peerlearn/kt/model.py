"""Knowledge tracing via biased matrix factorization on the latest-attempt matrix.

The model predicts each user's probability of answering each question
correctly as ``clamp(mu + b_u + b_q + u . v, 0, 1)`` and is fitted by SGD over
the observed cells.  Predictions are projected through the tag-weight matrix
into per-knowledge-unit states in [0, 1], which are classified into mastery
bands and summarized into cohort distributions.

The clamped-linear link (rather than a sigmoid) keeps the k=0 biases-only
model exactly solvable by least squares, which the test oracles exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ..domain import KnowledgeUnit, Millis, Question, tag_weights
from ..errors import (DimensionMismatch, EmptyCohort, EmptyMatrix,
                      IndexOutOfRange, OutOfRange)
from ..eventlog import LatestAttemptMatrix
from . import kernels

DEFAULT_THRESHOLDS = (0.5, 0.75)  # band boundaries; boundary belongs to the upper band
NEUTRAL_STATE = 0.5  # prior for knowledge units no question is tagged with


class Band(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    BLUE = "blue"


@dataclass(frozen=True)
class Hyperparameters:
    k: int = 4
    learning_rate: float = 0.01
    reg: float = 0.05
    epochs: int = 200
    rng_seed: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.reg < 0:
            raise ValueError("reg must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class FactorModel:
    """Fitted parameters; arrays are owned by the model and must not be mutated."""

    mu: float
    user_bias: np.ndarray
    question_bias: np.ndarray
    user_factors: np.ndarray
    question_factors: np.ndarray
    hyper: Hyperparameters

    @property
    def n_users(self) -> int:
        return len(self.user_bias)

    @property
    def n_questions(self) -> int:
        return len(self.question_bias)


@dataclass(frozen=True)
class KnowledgeStateSnapshot:
    """Per-user, per-knowledge-unit competency in [0, 1] with mastery bands."""

    at: Millis
    states: np.ndarray  # N x L floats
    bands: tuple[tuple[Band, ...], ...]  # N x L

    @property
    def n_users(self) -> int:
        return self.states.shape[0]

    @property
    def n_kus(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True)
class CohortSummary:
    """Five-number summary plus mean of one knowledge unit's states."""

    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


def _observations(matrix: LatestAttemptMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # canonical (user, question) order so fitting is independent of dict order
    keys = sorted(matrix.entries)
    ui = np.array([k[0] for k in keys], dtype=np.int64)
    qi = np.array([k[1] for k in keys], dtype=np.int64)
    vals = np.array([float(matrix.entries[k][0]) for k in keys], dtype=np.float64)
    return ui, qi, vals


def fit(matrix: LatestAttemptMatrix, hyper: Hyperparameters) -> FactorModel:
    """Fit by SGD, deterministic for a fixed ``hyper.rng_seed``.

    The epoch loop guarantees a non-increasing training loss at epoch
    boundaries: an epoch that regresses is rolled back and the step size
    halved before continuing.
    """
    if not matrix.entries:
        raise EmptyMatrix("latest-attempt matrix has no observations")
    ui, qi, vals = _observations(matrix)
    n_users, n_questions = matrix.n_users, matrix.n_questions
    mu = float(vals.mean())
    rng = np.random.default_rng(hyper.rng_seed)
    bu = np.zeros(n_users)
    bq = np.zeros(n_questions)
    if hyper.k > 0:
        uf = rng.normal(0.0, 0.1, (n_users, hyper.k))
        vf = rng.normal(0.0, 0.1, (n_questions, hyper.k))
    else:
        uf = np.zeros((n_users, 0))
        vf = np.zeros((n_questions, 0))
    lr = hyper.learning_rate
    prev = kernels.batch_loss(ui, qi, vals, mu, bu, bq, uf, vf, hyper.reg)
    for _ in range(hyper.epochs):
        order = rng.permutation(len(vals)).astype(np.int64)
        saved = (bu.copy(), bq.copy(), uf.copy(), vf.copy())
        kernels.run_epoch(ui, qi, vals, order, mu, bu, bq, uf, vf, lr, hyper.reg)
        cur = kernels.batch_loss(ui, qi, vals, mu, bu, bq, uf, vf, hyper.reg)
        if cur > prev:
            bu, bq, uf, vf = saved
            lr *= 0.5
        else:
            prev = cur
    return FactorModel(mu, bu, bq, uf, vf, hyper)


def predict(model: FactorModel, user_idx: int, question_idx: int) -> float:
    """clamp(mu + b_u + b_q + u . v, 0, 1) for one cell."""
    if not 0 <= user_idx < model.n_users:
        raise IndexOutOfRange(f"user index {user_idx} outside 0..{model.n_users - 1}")
    if not 0 <= question_idx < model.n_questions:
        raise IndexOutOfRange(
            f"question index {question_idx} outside 0..{model.n_questions - 1}")
    raw = (model.mu + model.user_bias[user_idx] + model.question_bias[question_idx]
           + float(model.user_factors[user_idx] @ model.question_factors[question_idx]))
    return min(1.0, max(0.0, raw))


def predict_matrix(model: FactorModel) -> np.ndarray:
    """Clamped predictions for every (user, question) cell."""
    raw = (model.mu + model.user_bias[:, None] + model.question_bias[None, :]
           + model.user_factors @ model.question_factors.T)
    return np.clip(raw, 0.0, 1.0)


def loss_and_grad(matrix: LatestAttemptMatrix, mu: float, bu: np.ndarray,
                  bq: np.ndarray, uf: np.ndarray, vf: np.ndarray,
                  reg: float) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Full-batch loss and its analytic gradient.

    Loss = sum over observed cells of (a - clamp(z))^2
         + reg * (|b_u|^2 + |b_q|^2 + |U|^2 + |V|^2),
    with the clamp contributing zero gradient outside the open unit interval.
    """
    ui, qi, vals = _observations(matrix)
    z = mu + bu[ui] + bq[qi] + np.sum(uf[ui] * vf[qi], axis=1)
    p = np.clip(z, 0.0, 1.0)
    e = vals - p
    gate = ((z > 0.0) & (z < 1.0)).astype(np.float64)
    loss = float(np.sum(e * e) + reg * (np.sum(bu * bu) + np.sum(bq * bq)
                                        + np.sum(uf * uf) + np.sum(vf * vf)))
    coef = -2.0 * e * gate
    g_bu = np.bincount(ui, weights=coef, minlength=len(bu)) + 2.0 * reg * bu
    g_bq = np.bincount(qi, weights=coef, minlength=len(bq)) + 2.0 * reg * bq
    g_uf = 2.0 * reg * uf.copy()
    g_vf = 2.0 * reg * vf.copy()
    if uf.shape[1]:
        np.add.at(g_uf, ui, coef[:, None] * vf[qi])
        np.add.at(g_vf, qi, coef[:, None] * uf[ui])
    return loss, g_bu, g_bq, g_uf, g_vf


def build_omega(questions: list[Question], space: list[KnowledgeUnit]) -> np.ndarray:
    """Stack per-question tag-weight rows into the M x L matrix."""
    if not questions:
        return np.zeros((0, len(space)))
    return np.array([tag_weights(q, space) for q in questions])


def mastery_band(state: float, thresholds: tuple[float, float] = DEFAULT_THRESHOLDS) -> Band:
    """Red below the first threshold, Yellow below the second, Blue at or above.

    Boundaries belong to the upper band.
    """
    if not 0.0 <= state <= 1.0:
        raise OutOfRange(f"state {state} outside [0, 1]")
    lo, hi = thresholds
    if state < lo:
        return Band.RED
    if state < hi:
        return Band.YELLOW
    return Band.BLUE


def knowledge_state(model: FactorModel, omega: np.ndarray, at: Millis,
                    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS) -> KnowledgeStateSnapshot:
    """Project question-level predictions into per-knowledge-unit states.

    State of user n on unit l is the omega-weighted mean of n's predictions
    over questions tagged with l, or the neutral prior 0.5 when no question
    tags l.
    """
    if omega.ndim != 2 or omega.shape[0] != model.n_questions:
        raise DimensionMismatch(
            f"omega has shape {omega.shape}, expected ({model.n_questions}, L)")
    preds = predict_matrix(model)
    weight_sums = omega.sum(axis=0)
    states = np.full((model.n_users, omega.shape[1]), NEUTRAL_STATE)
    tagged = weight_sums > 0.0
    if tagged.any():
        states[:, tagged] = (preds @ omega[:, tagged]) / weight_sums[tagged]
    states = np.clip(states, 0.0, 1.0)
    bands = tuple(tuple(mastery_band(float(s), thresholds) for s in row) for row in states)
    return KnowledgeStateSnapshot(at=at, states=states, bands=bands)


def cohort_distribution(snapshot: KnowledgeStateSnapshot,
                        top_fraction: Optional[float] = None) -> tuple[CohortSummary, ...]:
    """Per-knowledge-unit summary over the cohort.

    ``top_fraction=p`` keeps the ceil(p*N) users with the highest state on
    each unit independently before summarizing; ``None`` summarizes everyone.
    Quartiles use linear interpolation.
    """
    n_users = snapshot.n_users
    if n_users == 0:
        raise EmptyCohort("snapshot has no users")
    if top_fraction is not None and not 0.0 < top_fraction <= 1.0:
        raise ValueError("top_fraction must be in (0, 1]")
    summaries = []
    for l in range(snapshot.n_kus):
        column = np.sort(snapshot.states[:, l])[::-1]
        if top_fraction is not None:
            column = column[: math.ceil(top_fraction * n_users)]
        q1, median, q3 = np.percentile(column, [25, 50, 75])
        summaries.append(CohortSummary(
            min=float(column.min()), q1=float(q1), median=float(median),
            q3=float(q3), max=float(column.max()), mean=float(column.mean())))
    return tuple(summaries)
