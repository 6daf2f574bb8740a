"""Laplace mechanism, the sparse vector technique, and threshold testing.

GPTT (generalized private threshold testing) compares every noisy query
answer against one shared noisy threshold and has no cap on the number of
positive answers. It is implemented here faithfully so that it can be
audited and attacked; it is *not* differentially private.

Randomness is consumed in a fixed order: the threshold draw first, then one
draw per query in query order. A mechanism call therefore never changes the
draws of earlier queries when more queries are appended.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .histogram import Histogram, Query, evaluate_all
from .noise import LaplaceDist, Rng


class Answer(enum.IntEnum):
    BOT = 0
    TOP = 1

    def __repr__(self) -> str:
        return "Top" if self else "Bot"


BOT = Answer.BOT
TOP = Answer.TOP


class AnswerMode(str, enum.Enum):
    BINARY = "binary"
    NOISY_VALUE = "noisy_value"


@dataclass(frozen=True)
class SvtParams:
    threshold: float
    cutoff: int
    epsilon: float
    sensitivity: float = 1.0
    answer_mode: AnswerMode = AnswerMode.BINARY

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be positive")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError("cutoff must be a positive integer")
        object.__setattr__(self, "answer_mode", AnswerMode(self.answer_mode))


@dataclass(frozen=True)
class GpttParams:
    """Threshold budget ``epsilon1`` and query budget ``epsilon2`` (may be inf)."""

    threshold: float
    epsilon1: float
    epsilon2: float
    sensitivity: float = 1.0

    def __post_init__(self) -> None:
        if not self.epsilon1 > 0 or math.isinf(self.epsilon1):
            raise ValueError("epsilon1 must be positive and finite")
        if not self.epsilon2 > 0:
            raise ValueError("epsilon2 must be positive or inf")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be positive")

    @property
    def noiseless_queries(self) -> bool:
        return math.isinf(self.epsilon2)

    @property
    def threshold_noise(self) -> LaplaceDist:
        return LaplaceDist(0.0, self.sensitivity / self.epsilon1)

    @property
    def query_noise(self) -> Optional[LaplaceDist]:
        if self.noiseless_queries:
            return None
        return LaplaceDist(0.0, self.sensitivity / self.epsilon2)


@dataclass(frozen=True)
class ThresholdVector:
    answers: tuple[Answer, ...]
    noisy_values: Optional[tuple[float, ...]] = None
    aborted_at: Optional[int] = None

    def __len__(self) -> int:
        return len(self.answers)

    @property
    def n_top(self) -> int:
        return sum(int(a) for a in self.answers)

    def as_array(self) -> np.ndarray:
        return np.array(self.answers, dtype=bool)


@dataclass(frozen=True)
class GpttTranscript:
    """Everything GPTT computed internally, for white-box checks."""

    noisy_threshold: float
    noisy_queries: tuple[float, ...]
    answers: ThresholdVector


def _answers(mask) -> tuple[Answer, ...]:
    return tuple(TOP if m else BOT for m in mask)


def _check_sensitivities(queries: Sequence[Query], bound: float) -> None:
    for q in queries:
        if q.sensitivity > bound:
            raise ValueError(
                f"query {q!r} has sensitivity {q.sensitivity} above the bound {bound}"
            )


def laplace_mechanism(
    values, summed_sensitivity: float, epsilon: float, rng: Rng
) -> np.ndarray:
    """Add i.i.d. Laplace(summed_sensitivity / epsilon) noise to ``values``.

    ``summed_sensitivity`` is the L1 sensitivity of the whole vector.
    """
    if not summed_sensitivity > 0:
        raise ValueError("summed_sensitivity must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    values = np.asarray(values, dtype=float)
    noise = LaplaceDist(0.0, summed_sensitivity / epsilon).sample(rng, values.shape)
    return values + noise


def svt(
    db: Histogram, queries: Sequence[Query], params: SvtParams, rng: Rng
) -> ThresholdVector:
    """Sparse vector technique with cutoff ``c``.

    Threshold noise has scale 2*Delta/eps and query noise 2*Delta*c/eps. A
    query is answered Top when its noisy answer is >= the noisy threshold;
    the run stops right after the c-th Top.
    """
    _check_sensitivities(queries, params.sensitivity)
    values = evaluate_all(queries, db)
    delta, eps, c = params.sensitivity, params.epsilon, params.cutoff
    u = rng.uniform(1 + len(values))
    noisy_threshold = params.threshold + LaplaceDist(0.0, 2 * delta / eps).quantile(u[0])
    noisy = values + LaplaceDist(0.0, 2 * delta * c / eps).quantile(u[1:])
    top = noisy >= noisy_threshold

    aborted_at = None
    hits = np.flatnonzero(top)
    if len(hits) >= c:
        aborted_at = int(hits[c - 1])
        top = top[: aborted_at + 1]
        noisy = noisy[: aborted_at + 1]

    noisy_values = None
    if params.answer_mode is AnswerMode.NOISY_VALUE:
        noisy_values = tuple(float(v) if t else math.nan for v, t in zip(noisy, top))
    return ThresholdVector(_answers(top), noisy_values, aborted_at)


def _gptt_values(values, params: GpttParams, rng: Rng, noisy_threshold=None):
    """Core GPTT on an array of true answers of any shape.

    Returns ``(noisy_threshold, noisy_values, top_mask)``. Passing
    ``noisy_threshold`` skips the threshold draw; tests use it to pin the
    threshold.
    """
    values = np.asarray(values, dtype=float)
    qnoise = params.query_noise
    if noisy_threshold is None:
        n_draws = 1 if qnoise is None else 1 + values.size
        u = rng.uniform(n_draws)
        noisy_threshold = params.threshold + params.threshold_noise.quantile(u[0])
        u_queries = u[1:]
    elif qnoise is not None:
        u_queries = rng.uniform(values.size)
    if qnoise is None:
        noisy = values
    else:
        noisy = values + qnoise.quantile(u_queries).reshape(values.shape)
    top = ~(noisy < noisy_threshold)
    return float(noisy_threshold), noisy, top


def gptt(
    db: Histogram, queries: Sequence[Query], params: GpttParams, rng: Rng
) -> GpttTranscript:
    """Generalized private threshold testing (no cutoff)."""
    _check_sensitivities(queries, params.sensitivity)
    return _gptt_transcript(evaluate_all(queries, db), params, rng)


def _gptt_transcript(values, params, rng, noisy_threshold=None) -> GpttTranscript:
    thr, noisy, top = _gptt_values(values, params, rng, noisy_threshold)
    return GpttTranscript(thr, tuple(float(v) for v in noisy), ThresholdVector(_answers(top)))


def gptt_batch(
    db: Histogram,
    queries: Sequence[Query],
    params: GpttParams,
    n_runs: int,
    rng: Rng,
) -> np.ndarray:
    """Answers of ``n_runs`` successive GPTT runs as an (n_runs, n_queries) bool array.

    Row ``r`` is exactly what the r-th successive ``gptt(db, queries,
    params, rng)`` call would return on the same stream; the runs are just
    vectorized.
    """
    _check_sensitivities(queries, params.sensitivity)
    values = evaluate_all(queries, db)
    width = 1 if params.noiseless_queries else 1 + len(values)
    u = rng.uniform((n_runs, width))
    thr = params.threshold + params.threshold_noise.quantile(u[:, :1])
    noisy = values[None, :]
    if not params.noiseless_queries:
        noisy = noisy + params.query_noise.quantile(u[:, 1:])
    return ~(noisy < thr)


_INSTANTIATIONS = {
    "lee_clifton": (0.25, 0.75),
    "chen": (0.5, 0.5),
    "stoddard": (1.0, math.inf),
}


def gptt_instantiation(name: str, epsilon: float) -> tuple[float, float]:
    """Budget split ``(epsilon1, epsilon2)`` used by a published GPTT variant.

    ``lee_clifton``: frequent itemset mining; ``chen``: synthetic data;
    ``stoddard``: private threshold testing for feature selection.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    try:
        f1, f2 = _INSTANTIATIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown instantiation {name!r}; expected one of {sorted(_INSTANTIATIONS)}"
        ) from None
    return f1 * epsilon, f2 * epsilon


def _majority(values, params, copies, rng, noisy_threshold=None):
    if copies < 1 or copies % 2 == 0:
        raise ValueError("copies must be a positive odd integer")
    values = np.asarray(values, dtype=float)
    # copy j of query i sits at position i*copies + j
    replicated = np.repeat(values, copies)
    thr, _, top = _gptt_values(replicated, params, rng, noisy_threshold)
    votes = top.reshape(len(values), copies).sum(axis=1)
    return thr, votes * 2 > copies


def gptt_amplified(
    db: Histogram,
    queries: Sequence[Query],
    params: GpttParams,
    copies: int,
    rng: Rng,
) -> ThresholdVector:
    """GPTT on ``copies`` replicas of every query, majority vote per query.

    All replicas are compared with the same noisy threshold, so as
    ``copies`` grows the vote converges to the noiseless comparison
    ``q_i(D) >= noisy_threshold``.
    """
    _check_sensitivities(queries, params.sensitivity)
    _, top = _majority(evaluate_all(queries, db), params, copies, rng)
    return ThresholdVector(_answers(top))


def svt_utility_bound(k: int, c: int, sensitivity: float, epsilon: float, delta: float) -> float:
    """(c*Delta/eps) * (ln k + ln(2/delta)): the SVT accuracy bound with unit constant."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return (c * sensitivity / epsilon) * (math.log(k) + math.log(2.0 / delta))


def gptt_utility_alpha(sensitivity: float, epsilon1: float, delta: float) -> float:
    """Accuracy of noiseless-query GPTT: (Delta/eps1) * ln(1/delta)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return sensitivity / epsilon1 * math.log(1.0 / delta)
