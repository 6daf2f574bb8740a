"""Databases as count histograms, linear queries over them, and sensitivity."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np


class DomainError(IndexError):
    """A query refers to a cell outside the histogram's domain."""


class Histogram:
    """Immutable vector of non-negative integer counts over a finite domain.

    Cell ``i`` holds the number of entries whose value is the i-th domain
    element. The domain size is fixed at construction.
    """

    __slots__ = ("_counts",)

    def __init__(self, counts) -> None:
        arr = np.asarray(counts)
        if arr.ndim != 1:
            raise ValueError("counts must be one-dimensional")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValueError("counts must be integers")
        arr = arr.astype(np.int64, copy=True)
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        arr.setflags(write=False)
        self._counts = arr

    @property
    def counts(self) -> np.ndarray:
        """Read-only int64 view of the counts."""
        return self._counts

    @property
    def domain_size(self) -> int:
        return int(self._counts.size)

    @property
    def scale(self) -> int:
        """Total number of entries, n."""
        return int(self._counts.sum())

    def __len__(self) -> int:
        return self.domain_size

    def __getitem__(self, i: int) -> int:
        return int(self._counts[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self._counts, other._counts)

    def __hash__(self) -> int:
        return hash(self._counts.tobytes())

    def __repr__(self) -> str:
        if self.domain_size <= 12:
            return f"Histogram({self._counts.tolist()})"
        return f"Histogram(domain_size={self.domain_size}, scale={self.scale})"

    def with_count(self, index: int, count: int) -> "Histogram":
        """Copy with one cell replaced."""
        arr = self._counts.copy()
        arr[index] = count
        return Histogram(arr)


@dataclass(frozen=True)
class Count:
    """Count query: the number of entries in one cell."""

    index: int

    @property
    def sensitivity(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Diff:
    """Difference query ``x[index_a] - x[index_b]``."""

    index_a: int
    index_b: int

    def __post_init__(self) -> None:
        if self.index_a == self.index_b:
            raise ValueError("difference query needs two distinct cells")

    @property
    def sensitivity(self) -> float:
        return 1.0


Query = Union[Count, Diff]


@dataclass(frozen=True)
class NeighborPair:
    """Two histograms at L1 distance exactly one."""

    left: Histogram
    right: Histogram

    def __post_init__(self) -> None:
        if not are_neighbors(self.left, self.right):
            raise ValueError("histograms are not neighbors")


def _check_index(i: int, size: int) -> None:
    if not 0 <= i < size:
        raise DomainError(f"cell index {i} outside domain of size {size}")


def evaluate(query: Query, db: Histogram) -> float:
    """True answer of ``query`` on ``db``."""
    n = db.domain_size
    if isinstance(query, Count):
        _check_index(query.index, n)
        return float(db.counts[query.index])
    if isinstance(query, Diff):
        _check_index(query.index_a, n)
        _check_index(query.index_b, n)
        return float(db.counts[query.index_a] - db.counts[query.index_b])
    raise TypeError(f"unsupported query {query!r}")


def evaluate_all(queries: Sequence[Query], db: Histogram) -> np.ndarray:
    """Vector of true answers, one per query."""
    return np.array([evaluate(q, db) for q in queries], dtype=float)


def are_neighbors(a: Histogram, b: Histogram) -> bool:
    if a.domain_size != b.domain_size:
        return False
    return int(np.abs(a.counts - b.counts).sum()) == 1


def global_sensitivity(queries: Sequence[Query]) -> float:
    """Largest single-query sensitivity in ``queries``.

    This is the per-query bound that threshold-testing mechanisms scale their
    noise to. The summed L1 sensitivity of a batch is passed to
    :func:`gptt_audit.mechanisms.laplace_mechanism` explicitly instead.
    """
    if len(queries) == 0:
        raise ValueError("need at least one query")
    return max(q.sensitivity for q in queries)
