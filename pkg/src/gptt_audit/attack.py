"""Count reconstruction through noiseless-query GPTT.

The attacker asks every difference query diff(u, v) = x_u - x_v against one
noisy threshold. larger(v), the set of u answered Top for diff(u, v), is the
upper set {u : x_u >= x_v + noisy_threshold}, so grouping cells by larger()
and sorting the groups by decreasing |larger()| orders them by count. A
second, honest Laplace release of each group's total then pins the counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .histogram import Histogram
from .mechanisms import GpttParams, _gptt_values, laplace_mechanism
from .noise import Rng


@dataclass(frozen=True, eq=False)
class OrderedPartition:
    """Blocks of cells in attack order, with the larger() relation.

    ``larger[v, u]`` is True when GPTT answered Top for diff(x_u, x_v).
    """

    blocks: tuple[tuple[int, ...], ...]
    larger: np.ndarray
    noisy_threshold: float

    def larger_set(self, v: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.larger[v]).tolist())

    def block_index(self) -> np.ndarray:
        """Block number of every cell."""
        out = np.empty(self.larger.shape[0], dtype=np.int64)
        for i, block in enumerate(self.blocks):
            out[list(block)] = i
        return out

    def check_invariants(self) -> None:
        """Raise AssertionError unless the blocks form a valid ordered partition."""
        k = self.larger.shape[0]
        cells = [c for block in self.blocks for c in block]
        assert sorted(cells) == list(range(k)), "blocks must partition the domain"
        assert all(self.blocks), "blocks must be non-empty"
        for block in self.blocks:
            rows = self.larger[list(block)]
            assert (rows == rows[0]).all(), "larger() differs inside a block"
        for prev, nxt in zip(self.blocks, self.blocks[1:]):
            big, small = self.larger[prev[0]], self.larger[nxt[0]]
            assert not (small & ~big).any(), "larger() sets are not nested"
            assert (big & ~small).any(), "larger() sets of adjacent blocks are equal"


@dataclass(frozen=True)
class ReconstructionReport:
    guessed_counts: tuple[int, ...]
    overall_accuracy: float
    small_count_accuracy: Optional[float]
    epsilon_used: float
    trial_seed: Optional[int] = None
    n_blocks: int = 0


def attack_threshold(epsilon: float, delta: float) -> int:
    """ceil(ln(1/delta) / epsilon): the threshold and the slack alpha."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.ceil(math.log(1.0 / delta) / epsilon)


def _order_blocks(larger: np.ndarray) -> tuple[tuple[int, ...], ...]:
    packed = np.ascontiguousarray(np.packbits(larger, axis=1))
    keys = packed.view(np.dtype((np.void, packed.shape[1]))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    sizes = larger.sum(axis=1)
    # biggest larger() set first; nested upper sets make size a total order
    group_order = np.argsort(-sizes[first], kind="stable")
    rank = np.empty_like(group_order)
    rank[group_order] = np.arange(len(group_order))
    cell_rank = rank[inverse]
    cells = np.argsort(cell_rank, kind="stable")
    bounds = np.flatnonzero(np.diff(cell_rank[cells])) + 1
    return tuple(tuple(int(c) for c in chunk) for chunk in np.split(cells, bounds))


def _partition_attack(db, epsilon, delta, rng, noisy_threshold=None) -> OrderedPartition:
    if db.domain_size < 2:
        raise ValueError("the attack needs at least two cells")
    x = db.counts.astype(float)
    # all ordered pairs, self-pairs included: values[u, v] = x_u - x_v
    values = np.subtract.outer(x, x)
    params = GpttParams(attack_threshold(epsilon, delta), epsilon, math.inf, 1.0)
    thr, _, top = _gptt_values(values, params, rng, noisy_threshold)
    del values
    larger = np.ascontiguousarray(top.T)
    larger.setflags(write=False)
    partition = OrderedPartition(_order_blocks(larger), larger, thr)
    partition.check_invariants()
    return partition


def partition_attack(db: Histogram, epsilon: float, delta: float, rng: Rng) -> OrderedPartition:
    """Ordered partition of the domain from one GPTT run with epsilon2 = inf.

    Cells in earlier blocks have strictly smaller counts than cells in later
    blocks, whatever the noisy threshold.
    """
    return _partition_attack(db, epsilon, delta, rng)


def level_sets(db: Histogram, upto: int) -> list[frozenset[int]]:
    """S_0 .. S_upto: the cells holding each exact count."""
    return [frozenset(np.flatnonzero(db.counts == i).tolist()) for i in range(upto + 1)]


def checked_levels(k: int, epsilon: float, delta: float) -> range:
    """Levels i in [0, k - 2*alpha] whose blocks must match exactly."""
    alpha = attack_threshold(epsilon, delta)
    return range(0, k - 2 * alpha + 1)


def reconstruction_theorem_check(
    db: Histogram, k: int, epsilon: float, delta: float, n_trials: int, rng: Rng
) -> float:
    """Fraction of attack runs whose first blocks equal the level sets exactly.

    Requires S_i non-empty for all i in [0, k] and k > 2*alpha; block i is
    compared with S_i for every i in :func:`checked_levels`.
    """
    alpha = attack_threshold(epsilon, delta)
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    levels = level_sets(db, k)
    for i, s in enumerate(levels):
        if not s:
            raise ValueError(f"level S_{i} is empty; every count in [0, {k}] needs support")
    if k <= 2 * alpha:
        raise ValueError(f"k = {k} must exceed 2*alpha = {2 * alpha}")
    tested = checked_levels(k, epsilon, delta)
    hits = 0
    for trial_rng in rng.spawn(n_trials):
        blocks = partition_attack(db, epsilon, delta, trial_rng).blocks
        if len(blocks) > tested[-1] and all(set(blocks[i]) == levels[i] for i in tested):
            hits += 1
    return hits / n_trials


def accuracy_metrics(true_db: Histogram, guessed) -> tuple[float, Optional[float]]:
    """Exact-match rate overall and over cells whose true count is in [0, 5].

    The second value is None when no cell has a small count.
    """
    guessed = np.asarray(guessed)
    truth = true_db.counts
    if guessed.shape != truth.shape:
        raise ValueError(f"expected {truth.size} guesses, got {guessed.size}")
    hit = guessed == truth
    small = truth <= 5
    overall = float(hit.mean())
    return overall, (float(hit[small].mean()) if small.any() else None)


def _round_half_away(a: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.floor(np.abs(a) + 0.5)


def reconstruct(
    db: Histogram,
    epsilon: float,
    rng: Rng,
    delta: float = 0.05,
    split_fraction: float = 0.5,
) -> ReconstructionReport:
    """Guess every count from a partition attack plus noisy block totals.

    ``split_fraction * epsilon`` drives the partition attack; the rest pays
    for one Laplace release of the block totals (disjoint blocks, so the
    totals have L1 sensitivity 1). Each cell gets its block's rounded noisy
    average, clamped at zero.
    """
    if not 0 < split_fraction < 1:
        raise ValueError("split_fraction must lie in (0, 1)")
    eps1 = split_fraction * epsilon
    eps2 = epsilon - eps1
    partition = partition_attack(db, eps1, delta, rng)
    block_of = partition.block_index()
    totals = np.bincount(block_of, weights=db.counts, minlength=len(partition.blocks))
    sizes = np.bincount(block_of, minlength=len(partition.blocks))
    noisy = laplace_mechanism(totals, 1.0, eps2, rng)
    per_block = np.maximum(_round_half_away(noisy / sizes), 0).astype(np.int64)
    guessed = per_block[block_of]
    overall, small = accuracy_metrics(db, guessed)
    return ReconstructionReport(
        tuple(guessed.tolist()),
        overall,
        small,
        epsilon,
        trial_seed=rng.seed,
        n_blocks=len(partition.blocks),
    )
