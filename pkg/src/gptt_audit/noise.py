"""Laplace distribution primitives and a seedable, splittable random source.

Sampling goes through the inverse cdf of a uniform variate so that a seed
fixes the whole transcript, independent of sampler internals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_U64_MAX = 2**64 - 1
_TINY_U = 2.0**-54


class Rng:
    """Seeded random stream backed by numpy's PCG64.

    ``spawn`` hands out independent child streams; drawing from a child
    never shifts the draws of its parent or siblings.
    """

    def __init__(self, seed: int | np.random.SeedSequence = 0) -> None:
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            seed = int(seed)
            if not 0 <= seed <= _U64_MAX:
                raise ValueError("seed must be a 64-bit unsigned integer")
            self._seq = np.random.SeedSequence(seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def seed(self):
        return self._seq.entropy

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1).

        Each variate consumes exactly one 64-bit draw.
        """
        u = self._gen.random(size)
        if size is None:
            return u if u > 0.0 else _TINY_U
        u[u == 0.0] = _TINY_U
        return u

    def spawn(self, n: int) -> list["Rng"]:
        return [Rng(s) for s in self._seq.spawn(n)]

    def child(self) -> "Rng":
        return self.spawn(1)[0]

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy generator, for permutations and the like."""
        return self._gen


@dataclass(frozen=True)
class LaplaceDist:
    """Laplace law with location ``loc`` and scale ``scale`` > 0."""

    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.scale > 0 or math.isinf(self.scale):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-np.abs(x - self.loc) / self.scale) / (2.0 * self.scale)
        return out[()] if out.ndim == 0 else out

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = -np.abs(x - self.loc) / self.scale - math.log(2.0 * self.scale)
        return out[()] if out.ndim == 0 else out

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        # exp(-|z|) keeps both branches finite
        half_tail = 0.5 * np.exp(-np.abs(z))
        out = np.where(z < 0, half_tail, 1.0 - half_tail)
        return out[()] if out.ndim == 0 else out

    def sf(self, x):
        """Survival function, 1 - cdf, without cancellation in the right tail."""
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        half_tail = 0.5 * np.exp(-np.abs(z))
        out = np.where(z < 0, 1.0 - half_tail, half_tail)
        return out[()] if out.ndim == 0 else out

    def logcdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        a = np.abs(z)
        out = np.where(z < 0, -math.log(2.0) - a, np.log1p(-0.5 * np.exp(-a)))
        return out[()] if out.ndim == 0 else out

    def logsf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        a = np.abs(z)
        out = np.where(z < 0, np.log1p(-0.5 * np.exp(-a)), -math.log(2.0) - a)
        return out[()] if out.ndim == 0 else out

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
            raise ValueError("quantile needs p strictly inside (0, 1)")
        out = np.where(
            p < 0.5,
            self.loc + self.scale * np.log(2.0 * p),
            self.loc - self.scale * np.log(2.0 * (1.0 - p)),
        )
        return out[()] if out.ndim == 0 else out

    def sample(self, rng: Rng, size=None):
        return self.quantile(rng.uniform(size))


def pdf(d: LaplaceDist, x):
    return d.pdf(x)


def cdf(d: LaplaceDist, x):
    return d.cdf(x)


def quantile(d: LaplaceDist, p):
    return d.quantile(p)


def sample(d: LaplaceDist, rng: Rng, size=None):
    return d.sample(rng, size)
