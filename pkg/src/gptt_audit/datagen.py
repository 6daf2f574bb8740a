"""Histogram datasets: synthetic generators, summary metadata, CSV I/O.

CSV layout: a header line ``index,count`` followed by one row per cell with
zero-based contiguous indices and non-negative integer counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .histogram import Histogram
from .noise import Rng

CSV_HEADER = ("index", "count")


class DatasetError(ValueError):
    """Malformed or unreadable histogram file."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    domain_size: int
    scale: int
    # largest k with every count 0..k present; -1 when no cell is empty
    support_k: int


def zipfian_histogram(domain_size: int, total: int, exponent: float, rng: Rng) -> Histogram:
    """Histogram of ``total`` i.i.d. draws from a finite Zipf law.

    Cell ``r`` (zero-based) has probability proportional to (r + 1)^-exponent.
    Draws use the inverse cdf of the normalized weights.
    """
    if domain_size < 1 or total < 1:
        raise ValueError("domain_size and total must be positive")
    if not exponent > 0:
        raise ValueError("exponent must be positive")
    weights = np.arange(1, domain_size + 1, dtype=float) ** -exponent
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.uniform(total), side="right")
    np.minimum(cells, domain_size - 1, out=cells)
    return Histogram(np.bincount(cells, minlength=domain_size))


def staircase_histogram(k: int, extra_cells: int = 0) -> Histogram:
    """One cell of each count 0..k, then ``extra_cells`` cells of count k + 10."""
    if k < 0 or extra_cells < 0:
        raise ValueError("k and extra_cells must be non-negative")
    return Histogram(np.concatenate([np.arange(k + 1), np.full(extra_cells, k + 10)]))


def support_k(db: Histogram) -> int:
    levels = np.unique(db.counts)
    run = levels == np.arange(levels.size)
    return int(run.size if run.all() else np.argmin(run)) - 1


def compute_meta(db: Histogram, name: str = "") -> DatasetMeta:
    return DatasetMeta(name, db.domain_size, db.scale, support_k(db))


def write_histogram_csv(db: Histogram, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(enumerate(db.counts.tolist()))


def read_histogram_csv(path) -> tuple[Histogram, DatasetMeta]:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot open {path}: {exc.strerror}") from exc
    counts: list[int] = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DatasetError("no rows")
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise DatasetError(f"expected header 'index,count', got {','.join(header)!r}", 1)
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DatasetError(f"expected 2 fields, got {len(row)}", line)
            try:
                index, count = int(row[0]), int(row[1])
            except ValueError:
                raise DatasetError(f"non-integer field in {','.join(row)!r}", line) from None
            if index != len(counts):
                raise DatasetError(f"expected index {len(counts)}, got {index}", line)
            if count < 0:
                raise DatasetError(f"negative count {count}", line)
            counts.append(count)
    if not counts:
        raise DatasetError("no rows")
    db = Histogram(counts)
    return db, compute_meta(db, path.stem)
