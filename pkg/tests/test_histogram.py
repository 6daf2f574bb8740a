import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gptt_audit.histogram import (
    Count,
    Diff,
    DomainError,
    Histogram,
    NeighborPair,
    are_neighbors,
    evaluate,
    global_sensitivity,
)


def test_evaluate_examples():
    db = Histogram([3, 5])
    assert evaluate(Count(0), db) == 3
    assert evaluate(Diff(1, 0), db) == 2


def test_diff_rejects_self_pair():
    with pytest.raises(ValueError):
        Diff(0, 0)


def test_evaluate_out_of_range():
    with pytest.raises(DomainError):
        evaluate(Count(2), Histogram([3, 5]))
    with pytest.raises(DomainError):
        evaluate(Diff(0, 7), Histogram([3, 5]))


@pytest.mark.parametrize(
    "a, b, expected",
    [([1, 2], [1, 3], True), ([1, 2], [1, 2], False), ([1, 2], [0, 3], False), ([1], [1, 0], False)],
)
def test_are_neighbors(a, b, expected):
    assert are_neighbors(Histogram(a), Histogram(b)) is expected


def test_global_sensitivity():
    assert global_sensitivity([Count(0)]) == 1
    assert global_sensitivity([Diff(0, 1), Diff(2, 3)]) == 1
    assert global_sensitivity([Count(0), Diff(1, 2)]) == 1
    with pytest.raises(ValueError):
        global_sensitivity([])


def test_histogram_validation_and_immutability():
    with pytest.raises(ValueError):
        Histogram([1, -1])
    with pytest.raises(ValueError):
        Histogram([1.5])
    db = Histogram([1, 2])
    with pytest.raises(ValueError):
        db.counts[0] = 5
    assert db.scale == 3 and len(db) == 2
    assert db == Histogram(np.array([1, 2]))
    assert NeighborPair(db, db.with_count(0, 0)).right == Histogram([0, 2])
    with pytest.raises(ValueError):
        NeighborPair(db, db)


counts_st = st.lists(st.integers(0, 20), min_size=2, max_size=8)


@st.composite
def neighbor_and_query(draw):
    counts = draw(counts_st)
    k = len(counts)
    cell = draw(st.integers(0, k - 1))
    other = list(counts)
    if counts[cell] > 0 and draw(st.booleans()):
        other[cell] -= 1
    else:
        other[cell] += 1
    if draw(st.booleans()):
        q = Count(draw(st.integers(0, k - 1)))
    else:
        a = draw(st.integers(0, k - 1))
        b = draw(st.integers(0, k - 1).filter(lambda i: i != a))
        q = Diff(a, b)
    return Histogram(counts), Histogram(other), q


@given(neighbor_and_query())
def test_query_change_bounded_by_sensitivity(case):
    d1, d2, q = case
    assert are_neighbors(d1, d2)
    assert abs(evaluate(q, d1) - evaluate(q, d2)) <= q.sensitivity


@given(counts_st, counts_st)
def test_are_neighbors_symmetric(a, b):
    assert are_neighbors(Histogram(a), Histogram(b)) == are_neighbors(Histogram(b), Histogram(a))


@given(counts_st, st.data())
def test_diff_antisymmetric(counts, data):
    k = len(counts)
    a = data.draw(st.integers(0, k - 1))
    b = data.draw(st.integers(0, k - 1).filter(lambda i: i != a))
    db = Histogram(counts)
    assert evaluate(Diff(a, b), db) == -evaluate(Diff(b, a), db)
