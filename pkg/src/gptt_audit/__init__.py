"""Sparse vector technique, generalized private threshold testing (GPTT),
and tools showing that GPTT leaks: exact privacy-loss audits and count
reconstruction attacks."""

from .histogram import Count, Diff, Histogram, NeighborPair, are_neighbors, evaluate, global_sensitivity
from .noise import LaplaceDist, Rng
from .mechanisms import (
    BOT,
    TOP,
    GpttParams,
    GpttTranscript,
    SvtParams,
    ThresholdVector,
    gptt,
    gptt_amplified,
    gptt_instantiation,
    laplace_mechanism,
    svt,
)

__version__ = "0.1.0"

__all__ = [
    "BOT",
    "TOP",
    "Count",
    "Diff",
    "GpttParams",
    "GpttTranscript",
    "Histogram",
    "LaplaceDist",
    "NeighborPair",
    "Rng",
    "SvtParams",
    "ThresholdVector",
    "are_neighbors",
    "evaluate",
    "global_sensitivity",
    "gptt",
    "gptt_amplified",
    "gptt_instantiation",
    "laplace_mechanism",
    "svt",
]
