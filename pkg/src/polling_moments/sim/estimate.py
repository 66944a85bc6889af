"""Batch-means moment estimators for stage samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import stats

from .engine import StageSampleSet

MIN_BATCHES = 10


class InsufficientSamplesError(ValueError):
    pass


@dataclass(frozen=True)
class MomentEstimate:
    point: float
    ci_halfwidth: float
    batches: int

    def covers(self, value: float) -> bool:
        return abs(value - self.point) <= self.ci_halfwidth

    @property
    def low(self) -> float:
        return self.point - self.ci_halfwidth

    @property
    def high(self) -> float:
        return self.point + self.ci_halfwidth


def batch_count(n: int) -> int:
    if n < MIN_BATCHES:
        raise InsufficientSamplesError(f"need at least {MIN_BATCHES} observations for batch means, got {n}")
    return 20 if n >= 200 else MIN_BATCHES


def batch_means(x: np.ndarray, batches: int | None = None) -> np.ndarray:
    """Means of consecutive equal-size batches along axis 0.

    The leading remainder is dropped so the retained data end at the last
    observation.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    b = batch_count(n) if batches is None else batches
    size = n // b
    if size < 1:
        raise InsufficientSamplesError(f"cannot form {b} batches from {n} observations")
    kept = x[n - b * size:]
    return kept.reshape((b, size) + x.shape[1:]).mean(axis=1)


def ci_from_batches(means: np.ndarray, level: float = 0.95):
    """Point estimate and CI half-width along axis 0 of batch means."""
    b = means.shape[0]
    point = means.mean(axis=0)
    sd = means.std(axis=0, ddof=1)
    half = stats.t.ppf(0.5 + level / 2, b - 1) * sd / np.sqrt(b)
    return point, half


def _estimates(per_rep: list, level: float):
    means = np.concatenate([batch_means(x) for x in per_rep], axis=0)
    point, half = ci_from_batches(means, level)
    return means.shape[0], point, half


Samples = Union[StageSampleSet, Sequence[StageSampleSet]]


def _as_list(samples: Samples) -> list:
    if isinstance(samples, StageSampleSet):
        return [samples]
    out = list(samples)
    if not out:
        raise InsufficientSamplesError("no sample sets given")
    return out


@dataclass(frozen=True)
class StageMoments:
    """Estimates of E[Q_k(A_i)^p] (I x K) and E[B_i^p] (I)."""

    p: int
    queue: tuple
    busy: tuple

    def queue_points(self) -> np.ndarray:
        return np.array([[e.point for e in row] for row in self.queue])

    def queue_halfwidths(self) -> np.ndarray:
        return np.array([[e.ci_halfwidth for e in row] for row in self.queue])

    def busy_points(self) -> np.ndarray:
        return np.array([e.point for e in self.busy])

    def busy_halfwidths(self) -> np.ndarray:
        return np.array([e.ci_halfwidth for e in self.busy])


def estimate_moments(samples: Samples, p: int, level: float = 0.95) -> StageMoments:
    """Sample p-th moments with batch-means confidence intervals.

    A list of replications contributes the batch means of every replication.
    """
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p}")
    sets = _as_list(samples)
    q = [s.queue.astype(float) ** p for s in sets]
    b = [s.busy ** p for s in sets]
    nb, qp, qh = _estimates(q, level)
    _, bp, bh = _estimates(b, level)
    I, K = qp.shape
    queue = tuple(tuple(MomentEstimate(float(qp[i, k]), float(qh[i, k]), nb) for k in range(K))
                  for i in range(I))
    busy = tuple(MomentEstimate(float(bp[i]), float(bh[i]), nb) for i in range(I))
    return StageMoments(p, queue, busy)


def estimate_series(x: np.ndarray, level: float = 0.95) -> MomentEstimate:
    """Batch-means estimate of the mean of a 1-d series."""
    means = batch_means(np.asarray(x, dtype=float))
    point, half = ci_from_batches(means, level)
    return MomentEstimate(float(point), float(half), means.shape[0])


def serving_fraction(samples: Samples, level: float = 0.95) -> MomentEstimate:
    """Long-run fraction of time the server is busy, by a ratio of batch sums."""
    sets = _as_list(samples)
    num = np.concatenate([batch_means(s.busy.sum(axis=1)) for s in sets])
    den = np.concatenate([batch_means(s.cycle_lengths) for s in sets])
    ratios = num / den
    point, half = ci_from_batches(ratios, level)
    return MomentEstimate(float(point), float(half), ratios.shape[0])
