"""Polling-system simulator and steady-state moment estimators."""

from .engine import METHODS, SimState, StageSampleSet, make_rng, simulate
from .estimate import (
    InsufficientSamplesError,
    MomentEstimate,
    StageMoments,
    batch_means,
    estimate_moments,
    estimate_series,
    serving_fraction,
)
from .replicate import floor_state, initial_state, merged_hash, run_replications

__all__ = [
    "METHODS",
    "InsufficientSamplesError",
    "MomentEstimate",
    "SimState",
    "StageMoments",
    "StageSampleSet",
    "batch_means",
    "estimate_moments",
    "estimate_series",
    "floor_state",
    "initial_state",
    "make_rng",
    "merged_hash",
    "run_replications",
    "serving_fraction",
    "simulate",
]
