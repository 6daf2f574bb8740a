import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gptt_audit.histogram import Count, Diff, Histogram
from gptt_audit.mechanisms import (
    BOT,
    TOP,
    AnswerMode,
    GpttParams,
    SvtParams,
    _gptt_transcript,
    _gptt_values,
    _majority,
    gptt,
    gptt_amplified,
    gptt_batch,
    gptt_instantiation,
    gptt_utility_alpha,
    laplace_mechanism,
    svt,
    svt_utility_bound,
)
from gptt_audit.noise import Rng


def counts_queries(values):
    """Histogram and Count queries whose true answers are ``values``."""
    return Histogram(values), [Count(i) for i in range(len(values))]


def test_laplace_mechanism_vanishing_noise():
    out = laplace_mechanism([7], 1.0, 1e6, Rng(0))
    assert abs(out[0] - 7) < 1e-3


def test_laplace_mechanism_variance():
    out = laplace_mechanism(np.zeros(10**5), 1.0, 1.0, Rng(1))
    assert out.var() == pytest.approx(2.0, rel=0.05)


@pytest.mark.parametrize("sens, eps", [(0, 1), (1, 0), (-1, 1)])
def test_laplace_mechanism_rejects_bad_args(sens, eps):
    with pytest.raises(ValueError):
        laplace_mechanism([1.0], sens, eps, Rng(0))


def test_svt_vanishing_noise_example():
    db, qs = counts_queries([5, 1, 7])
    out = svt(db, qs, SvtParams(3, 2, 1e6), Rng(0))
    assert out.answers == (TOP, BOT, TOP)
    assert out.aborted_at == 2


def test_svt_cutoff_one_aborts_first():
    db, qs = counts_queries([50, 0, 50, 50])
    out = svt(db, qs, SvtParams(3, 1, 1e6), Rng(0))
    assert out.aborted_at == 0 and out.answers == (TOP,)


def test_svt_noisy_value_mode():
    db, qs = counts_queries([5, 1, 7, 9])
    out = svt(db, qs, SvtParams(3, 5, 1e6, answer_mode=AnswerMode.NOISY_VALUE), Rng(0))
    assert out.aborted_at is None
    vals = out.noisy_values
    assert math.isnan(vals[1])
    np.testing.assert_allclose([vals[0], vals[2], vals[3]], [5, 7, 9], atol=1e-3)


def test_svt_rejects_oversensitive_query():
    db, qs = counts_queries([1, 2])
    with pytest.raises(ValueError):
        svt(db, qs, SvtParams(0, 1, 1.0, sensitivity=0.5), Rng(0))


@pytest.mark.parametrize("kw", [dict(cutoff=0), dict(epsilon=0), dict(sensitivity=0)])
def test_svt_params_validation(kw):
    base = dict(threshold=0, cutoff=1, epsilon=1)
    base.update(kw)
    with pytest.raises(ValueError):
        SvtParams(**base)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(0, 10), min_size=1, max_size=12),
    st.integers(1, 4),
    st.integers(0, 2**32),
)
def test_svt_never_exceeds_cutoff(values, c, seed):
    db, qs = counts_queries(values)
    out = svt(db, qs, SvtParams(4, c, 0.5), Rng(seed))
    assert out.n_top <= c
    if out.aborted_at is not None:
        assert out.answers[-1] is TOP and out.n_top == c


def test_gptt_injected_threshold():
    tr = _gptt_transcript([0.0, 1.0], GpttParams(0, 1, math.inf), Rng(0), noisy_threshold=0.5)
    assert tr.answers.answers == (BOT, TOP)


def test_gptt_ties_go_to_top():
    _, _, top = _gptt_values([0.5], GpttParams(0, 1, math.inf), Rng(0), noisy_threshold=0.5)
    assert top.tolist() == [True]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1, max_size=10), st.integers(0, 2**32))
def test_gptt_transcript_consistency(values, seed):
    db, qs = counts_queries(values)
    tr = gptt(db, qs, GpttParams(3, 0.7, 0.9), Rng(seed))
    expect = tuple(TOP if q >= tr.noisy_threshold else BOT for q in tr.noisy_queries)
    assert tr.answers.answers == expect


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=2, max_size=10), st.integers(0, 2**32))
def test_gptt_noiseless_queries_are_monotone(values, seed):
    db, qs = counts_queries(values)
    ans = gptt(db, qs, GpttParams(4, 0.5, math.inf), Rng(seed)).answers.as_array()
    v = np.asarray(values)
    for i in range(len(v)):
        for j in range(len(v)):
            if v[i] == v[j]:
                assert ans[i] == ans[j]
            if v[i] < v[j] and ans[i]:
                assert ans[j]


def test_gptt_batch_matches_sequential_calls():
    db, qs = counts_queries([0, 3, 5, 9])
    for params in (GpttParams(4, 0.5, 0.5), GpttParams(4, 0.5, math.inf)):
        batch = gptt_batch(db, qs, params, 50, Rng(11))
        rng = Rng(11)
        seq = np.array([gptt(db, qs, params, rng).answers.as_array() for _ in range(50)])
        np.testing.assert_array_equal(batch, seq)


def test_appending_queries_keeps_earlier_draws():
    db = Histogram([1, 2, 3])
    params = GpttParams(2, 1, 1)
    short = gptt(db, [Count(0), Count(1)], params, Rng(4))
    long = gptt(db, [Count(0), Count(1), Count(2)], params, Rng(4))
    assert long.noisy_threshold == short.noisy_threshold
    assert long.noisy_queries[:2] == short.noisy_queries


def test_gptt_frequency_matches_quadrature():
    # (Bot, Top) on the t=1 counterexample; reference value from an independent integrator
    expected = 0.23195058173759264
    db = Histogram([1, 1])
    n = 10**6
    out = gptt_batch(db, [Diff(0, 1), Count(1)], GpttParams(0, 0.5, 0.5), n, Rng(2))
    freq = np.mean(~out[:, 0] & out[:, 1])
    se = math.sqrt(expected * (1 - expected) / n)
    assert abs(freq - expected) <= 3 * se


@pytest.mark.parametrize(
    "name, expected",
    [("lee_clifton", (0.25, 0.75)), ("chen", (0.5, 0.5)), ("stoddard", (1.0, math.inf))],
)
def test_instantiations(name, expected):
    assert gptt_instantiation(name, 1.0) == expected


def test_unknown_instantiation():
    with pytest.raises(ValueError):
        gptt_instantiation("nope", 1.0)


def test_gptt_params_validation():
    with pytest.raises(ValueError):
        GpttParams(0, math.inf, 1)
    with pytest.raises(ValueError):
        GpttParams(0, 1, 0)
    assert GpttParams(0, 1, math.inf).query_noise is None


@pytest.mark.parametrize("copies", [0, 2, -1])
def test_amplified_needs_odd_copies(copies):
    db, qs = counts_queries([0, 1])
    with pytest.raises(ValueError):
        gptt_amplified(db, qs, GpttParams(0, 1, 1), copies, Rng(0))


def test_amplified_single_copy_equals_gptt():
    db, qs = counts_queries([0, 2, 4, 6])
    params = GpttParams(3, 0.5, 0.5)
    for seed in range(20):
        a = gptt_amplified(db, qs, params, 1, Rng(seed))
        b = gptt(db, qs, params, Rng(seed)).answers
        assert a == b


def test_majority_concentrates():
    params = GpttParams(0, 1, 10)
    hits = 0
    for seed in range(100):
        _, mask = _majority([0.0, 1.0], params, 501, Rng(seed), noisy_threshold=0.5)
        hits += mask.tolist() == [False, True]
    assert hits >= 99


def test_svt_utility_bound_values():
    assert svt_utility_bound(100, 1, 1, 1, 0.1) == pytest.approx(7.600902459542082, rel=1e-12)
    delta = 2 / math.e
    assert svt_utility_bound(1, 1, 1, 1, delta) == pytest.approx(math.log(2 / delta), rel=1e-12)


def test_gptt_utility_alpha_values():
    assert gptt_utility_alpha(1, 1, 1 / math.e) == pytest.approx(1.0, rel=1e-12)
    assert gptt_utility_alpha(1, 0.5, 0.05) == pytest.approx(5.991464547107982, rel=1e-12)
