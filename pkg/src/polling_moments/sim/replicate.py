"""Independent replications and fluid-point initial states."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from ..analysis import solve_first_order
from ..fluid import fluid_pe
from ..model import BEP, SystemModel
from .engine import StageSampleSet, simulate


def initial_state(model: SystemModel, policy, n: float = 1.0) -> np.ndarray:
    """floor(n * q(a_1)) for the unscaled ``model``; BEP uses the exact first moment."""
    if isinstance(policy, BEP):
        q1 = solve_first_order(model, policy.r).q[0]
    else:
        q1 = fluid_pe(model, policy).q[0]
    return floor_state(n * q1)


def floor_state(x) -> np.ndarray:
    # small guard so values like 2.9999999999 from round-off floor to 3
    return np.array([max(0, math.floor(v + 1e-9 * max(1.0, abs(v)))) for v in x], dtype=np.int64)


def _run(args):
    model, policy, cycles, warmup, seed, rep, initial, method = args
    return simulate(model, policy, cycles, warmup, seed, initial, method, replication=rep)


def run_replications(model: SystemModel, policy, reps: int, cycles: int,
                     warmup: Optional[int] = None, base_seed: int = 0,
                     initial: Optional[Sequence[int]] = None, method: str = "stage",
                     workers: int = 1, stream: tuple = ()) -> list:
    """Replications 0..reps-1, each on stream (base_seed, r), returned in index order.

    A nonempty ``stream`` prefixes the spawn key, giving (base_seed, *stream, r).
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    jobs = [(model, policy, cycles, warmup, base_seed, tuple(stream) + (r,) if stream else r,
             initial, method) for r in range(reps)]
    if workers <= 1 or reps == 1:
        return [_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run, jobs))


def merged_hash(sets: Sequence[StageSampleSet]) -> str:
    h = hashlib.sha256()
    for s in sets:
        h.update(s.trace_hash().encode())
    return h.hexdigest()
