"""Quantifying how far GPTT is from differential privacy.

The counterexample uses two neighboring databases D and D' and 2t unit
sensitivity queries with threshold 0. On D the first t queries answer 0 and
the last t answer 1; on D' the roles are swapped. For the output vector
``(Bot * t, Top * t)`` the probability on D is

    V  = integral of f1(z) * [F2(z) * (1 - F2(z - 1))]^t dz

and on D' it is the same with F2(z) and F2(z - 1) exchanged, where f1 is the
threshold-noise density and F2 the query-noise cdf. The pointwise ratio of
the two integrands, kappa(z), exceeds one everywhere, so ln(V / V') grows
without bound in t.

Everything here is computed in log space so the log-ratio stays finite long
after V and V' underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal, Optional

import numpy as np

from .histogram import Count, Diff, Histogram, NeighborPair, Query, evaluate_all
from .mechanisms import BOT, TOP, Answer, GpttParams
from .noise import LaplaceDist, Rng

Side = Literal["D", "Dprime"]

TAIL_TOL = 1e-14


@dataclass(frozen=True)
class CounterexampleSpec:
    """Two-block counterexample with ``t`` copies of each query.

    ``epsilon2`` may be ``inf`` (noiseless queries); only the Monte Carlo
    and closed-form paths accept that case.
    """

    t: int
    epsilon1: float
    epsilon2: float

    threshold = 0.0
    sensitivity = 1.0

    def __post_init__(self) -> None:
        if int(self.t) != self.t or self.t < 0:
            raise ValueError("t must be a non-negative integer")
        if not self.epsilon1 > 0 or math.isinf(self.epsilon1):
            raise ValueError("epsilon1 must be positive and finite")
        if not self.epsilon2 > 0:
            raise ValueError("epsilon2 must be positive or inf")

    def answers(self, which: Side) -> np.ndarray:
        zeros, ones = np.zeros(self.t), np.ones(self.t)
        if which == "D":
            return np.concatenate([zeros, ones])
        if which == "Dprime":
            return np.concatenate([ones, zeros])
        raise ValueError(f"which must be 'D' or 'Dprime', got {which!r}")

    @property
    def target_output(self) -> tuple[Answer, ...]:
        return (BOT,) * self.t + (TOP,) * self.t

    @property
    def gptt_params(self) -> GpttParams:
        return GpttParams(self.threshold, self.epsilon1, self.epsilon2, self.sensitivity)

    def realization(self) -> tuple[NeighborPair, list[Query]]:
        """Concrete neighboring histograms and queries with the stated answers.

        Domain of two cells, D = (1, 1) and D' = (1, 0). ``Diff(0, 1)`` reads
        0 on D and 1 on D'; ``Count(1)`` reads 1 on D and 0 on D'.
        """
        pair = NeighborPair(Histogram([1, 1]), Histogram([1, 0]))
        queries: list[Query] = [Diff(0, 1)] * self.t + [Count(1)] * self.t
        if not (
            np.array_equal(evaluate_all(queries, pair.left), self.answers("D"))
            and np.array_equal(evaluate_all(queries, pair.right), self.answers("Dprime"))
        ):
            raise AssertionError("counterexample realization does not match its answers")
        return pair, queries


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    n_trials: int


@dataclass(frozen=True)
class AuditResult:
    prob_D: float
    prob_Dprime: float
    log_ratio: float
    method: Literal["quadrature", "monte_carlo"]
    std_error: Optional[float] = None
    n_trials: Optional[int] = None
    std_error_D: Optional[float] = None
    std_error_Dprime: Optional[float] = None


def _log_integrand(spec: CounterexampleSpec, which: Side) -> Callable[[np.ndarray], np.ndarray]:
    thr = LaplaceDist(spec.threshold, spec.sensitivity / spec.epsilon1)
    qn = LaplaceDist(0.0, spec.sensitivity / spec.epsilon2)
    t = spec.t
    if which == "D":
        def h(z):
            return thr.logpdf(z) + t * (qn.logcdf(z) + qn.logsf(z - 1.0))
    elif which == "Dprime":
        def h(z):
            return thr.logpdf(z) + t * (qn.logcdf(z - 1.0) + qn.logsf(z))
    else:
        raise ValueError(f"which must be 'D' or 'Dprime', got {which!r}")
    return h


def log_adaptive_simpson(
    logf: Callable[[np.ndarray], np.ndarray],
    edges,
    rtol: float = 1e-11,
    init_panels: int = 64,
    max_rounds: int = 60,
    max_intervals: int = 200_000,
) -> float:
    """ln of the integral of exp(logf) over [edges[0], edges[-1]].

    Adaptive Simpson with bisection, run breadth first so each round is one
    vectorized batch. ``edges`` should include every kink of the integrand.
    The integrand is rescaled by its largest sampled value before
    exponentiating, so tiny integrals are handled without underflow.
    """
    edges = np.asarray(sorted(set(float(e) for e in edges)))
    a = np.concatenate(
        [np.linspace(lo, hi, init_panels + 1)[:-1] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    b = np.concatenate(
        [np.linspace(lo, hi, init_panels + 1)[1:] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    m = 0.5 * (a + b)
    la, lm, lb = logf(a), logf(m), logf(b)
    shift = float(max(la.max(), lm.max(), lb.max()))
    if shift == -math.inf:
        return -math.inf
    fa, fm, fb = np.exp(la - shift), np.exp(lm - shift), np.exp(lb - shift)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol_density = rtol * whole.sum() / (edges[-1] - edges[0])
    # exp(logf - shift) carries relative error ~ |logf| * eps near the peak;
    # asking for more than that never terminates
    noise_rel = 64.0 * np.finfo(float).eps * max(1.0, abs(shift))

    pieces: list[float] = []
    for _ in range(max_rounds):
        lmid, rmid = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = np.exp(logf(lmid) - shift), np.exp(logf(rmid) - shift)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        done = np.abs(err) <= np.maximum(
            15.0 * tol_density * (b - a), noise_rel * np.abs(left + right)
        )
        pieces.extend((left + right + err / 15.0)[done])
        keep = ~done
        if not keep.any():
            break
        if keep.sum() > max_intervals:
            raise RuntimeError("adaptive quadrature did not converge")
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        flm, frm = flm[keep], frm[keep]
        left, right = left[keep], right[keep]
        lmid, rmid = lmid[keep], rmid[keep]
        a, m, b, fa, fm, fb, whole = (
            np.concatenate([a, m]),
            np.concatenate([lmid, rmid]),
            np.concatenate([m, b]),
            np.concatenate([fa, fm]),
            np.concatenate([flm, frm]),
            np.concatenate([fm, fb]),
            np.concatenate([left, right]),
        )
    else:
        raise RuntimeError("adaptive quadrature did not converge")
    total = math.fsum(pieces)
    if total <= 0.0:
        return -math.inf
    return math.log(total) + shift


def _quadrature_edges(spec: CounterexampleSpec) -> list[float]:
    half_width = spec.sensitivity / spec.epsilon1 * math.log(2.0 / TAIL_TOL)
    mu = spec.threshold
    # kinks: threshold density at mu, query cdfs at 0 and 1; 0.5 is the integrand peak
    inner = [p for p in (mu, 0.0, 0.5, 1.0) if mu - half_width < p < mu + half_width]
    return [mu - half_width, *inner, mu + half_width]


def log_output_probability(spec: CounterexampleSpec, which: Side) -> float:
    """ln P[GPTT(which) = target_output], by quadrature."""
    if math.isinf(spec.epsilon2):
        raise ValueError("epsilon2 = inf: use exact_output_probability_hard")
    return _cached_log_prob(spec, which)


@lru_cache(maxsize=4096)
def _cached_log_prob(spec: CounterexampleSpec, which: Side) -> float:
    return log_adaptive_simpson(_log_integrand(spec, which), _quadrature_edges(spec))


def exact_output_probability(spec: CounterexampleSpec, which: Side) -> float:
    """P[GPTT(which) = target_output] by adaptive quadrature."""
    return math.exp(log_output_probability(spec, which))


def log_ratio(spec: CounterexampleSpec) -> float:
    """Privacy loss ln(V / V') of the target output, by quadrature."""
    return log_output_probability(spec, "D") - log_output_probability(spec, "Dprime")


def exact_output_probability_hard(epsilon1: float) -> tuple[float, float]:
    """Closed form for the two-query counterexample with noiseless queries.

    On D, (Bot, Top) happens iff the noisy threshold lands in (0, 1]. On D'
    the first query exceeds the second, so Bot on the first forces Bot on
    the second and the probability is exactly zero.
    """
    if not epsilon1 > 0:
        raise ValueError("epsilon1 must be positive")
    thr = LaplaceDist(0.0, 1.0 / epsilon1)
    return float(thr.cdf(1.0) - thr.cdf(0.0)), 0.0


def kappa(z, epsilon2: float):
    """Ratio of the D and D' integrands, F(z)(1-F(z-1)) / (F(z-1)(1-F(z)))."""
    if math.isinf(epsilon2):
        raise ValueError("kappa needs a finite epsilon2")
    qn = LaplaceDist(0.0, 1.0 / epsilon2)
    z = np.asarray(z, dtype=float)
    out = np.exp(qn.logcdf(z) + qn.logsf(z - 1.0) - qn.logcdf(z - 1.0) - qn.logsf(z))
    return out[()] if out.ndim == 0 else out


def kappa_min(epsilon2: float, lo: float, hi: float, n_grid: int = 20001) -> float:
    """Minimum of kappa over [lo, hi] on a grid that includes the kinks."""
    grid = np.linspace(lo, hi, n_grid)
    extra = [p for p in (0.0, 0.5, 1.0) if lo < p < hi]
    grid = np.concatenate([grid, extra])
    return float(kappa(grid, epsilon2).min())


def proof_interval_half_width(spec: CounterexampleSpec) -> float:
    """|F1^{-1}(V'/4)|, the half width of the interval the proof restricts to.

    Computed from ln V' so it stays finite when V' underflows.
    """
    log_alpha = log_output_probability(spec, "Dprime")
    # quantile of Lap(0, b) at p < 1/2 is b*ln(2p); here p = V'/4 <= 1/4
    return (spec.sensitivity / spec.epsilon1) * (math.log(2.0) - log_alpha)


def proof_lower_bound(spec: CounterexampleSpec) -> float:
    """t * ln(kappa_min) - ln 2, the log-ratio lower bound from the proof."""
    half = proof_interval_half_width(spec)
    k = kappa_min(spec.epsilon2, -half, half)
    return spec.t * math.log(k) - math.log(2.0)


def _conditional_log_prob(spec: CounterexampleSpec, which: Side, thr: np.ndarray) -> np.ndarray:
    """ln P[target | noisy threshold], per threshold value.

    Given the threshold the query answers are independent, so the
    probability is a product of per-query cdf / survival values.
    """
    values = spec.answers(which)
    t = spec.t
    bot_vals, top_vals = values[:t], values[t:]
    out = np.zeros_like(thr)
    if t == 0:
        return out
    # every block is t copies of one value
    q_bot, q_top = bot_vals[0], top_vals[0]
    if math.isinf(spec.epsilon2):
        ok = (q_bot < thr) & (q_top >= thr)
        out[~ok] = -math.inf
        return out
    qn = LaplaceDist(0.0, spec.sensitivity / spec.epsilon2)
    return t * (qn.logcdf(thr - q_bot) + qn.logsf(thr - q_top))


def mc_output_probability(
    spec: CounterexampleSpec,
    which: Side,
    n_trials: int,
    rng: Rng,
    chunk: int = 1_000_000,
) -> MonteCarloEstimate:
    """Rao-Blackwellized Monte Carlo estimate of P[GPTT(which) = target].

    Each trial draws only the noisy threshold and multiplies the exact
    conditional probabilities of the 2t answers.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    thr_dist = LaplaceDist(spec.threshold, spec.sensitivity / spec.epsilon1)
    n_seen, mean, m2 = 0, 0.0, 0.0
    remaining = n_trials
    while remaining:
        size = min(chunk, remaining)
        thr = thr_dist.sample(rng, size)
        x = np.exp(_conditional_log_prob(spec, which, thr))
        c_mean = float(x.mean())
        c_m2 = float(((x - c_mean) ** 2).sum())
        # parallel-variance merge of running and chunk moments
        total = n_seen + size
        d = c_mean - mean
        mean += d * size / total
        m2 += c_m2 + d * d * n_seen * size / total
        n_seen = total
        remaining -= size
    var = m2 / (n_seen - 1) if n_seen > 1 else 0.0
    return MonteCarloEstimate(mean, math.sqrt(var / n_seen), n_seen)


def audit(
    spec: CounterexampleSpec,
    method: Literal["quadrature", "monte_carlo"] = "quadrature",
    n_trials: Optional[int] = None,
    rng: Optional[Rng] = None,
) -> AuditResult:
    """Both output probabilities and their log-ratio.

    For Monte Carlo, D and D' use independent child streams and
    ``std_error`` is the delta-method error of the log-ratio.
    """
    if method == "quadrature":
        log_d = log_output_probability(spec, "D")
        log_dp = log_output_probability(spec, "Dprime")
        return AuditResult(math.exp(log_d), math.exp(log_dp), log_d - log_dp, "quadrature")
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    if rng is None or n_trials is None:
        raise ValueError("monte_carlo needs n_trials and rng")
    rng_d, rng_dp = rng.spawn(2)
    est_d = mc_output_probability(spec, "D", n_trials, rng_d)
    est_dp = mc_output_probability(spec, "Dprime", n_trials, rng_dp)
    if est_d.mean > 0 and est_dp.mean > 0:
        lr = math.log(est_d.mean) - math.log(est_dp.mean)
        se = math.hypot(est_d.std_error / est_d.mean, est_dp.std_error / est_dp.mean)
    else:
        lr = math.inf if est_d.mean > 0 else math.nan
        se = math.nan
    return AuditResult(
        est_d.mean,
        est_dp.mean,
        lr,
        "monte_carlo",
        std_error=se,
        n_trials=n_trials,
        std_error_D=est_d.std_error,
        std_error_Dprime=est_dp.std_error,
    )


def min_t_violating(
    epsilon_target: float, epsilon1: float, epsilon2: float, t_max: int
) -> Optional[int]:
    """Smallest t <= t_max whose quadrature log-ratio exceeds ``epsilon_target``.

    Doubling search to bracket the crossing, then bisection. Relies on the
    log-ratio increasing in t.
    """
    if math.isinf(epsilon2):
        raise ValueError("epsilon2 must be finite")

    def exceeds(t: int) -> bool:
        return log_ratio(CounterexampleSpec(t, epsilon1, epsilon2)) > epsilon_target

    lo, hi = 0, 1
    while not exceeds(hi):
        if hi >= t_max:
            return None
        lo, hi = hi, min(2 * hi, t_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if exceeds(mid):
            hi = mid
        else:
            lo = mid
    return hi
