"""Discrete-event simulation of a polling system observed at stage boundaries.

Two engines produce the same law for Q(A_i) and B_i:

* ``"stage"`` advances one stage at a time.  A served customer's busy
  period is generated in branching generations (total service of one
  generation, then Poisson arrivals during it), and non-served queues
  receive Poisson arrivals over the whole busy and switchover times.
* ``"event"`` moves customer by customer with explicit arrival clocks.  It
  is slower and is kept as a cross-check of the stage engine.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..model import BEP, BGP, BSP, SystemModel, require_valid

METHODS = ("stage", "event")


@dataclass
class SimState:
    clock: float
    queue_lengths: np.ndarray
    stage: int
    rng: np.random.Generator
    next_arrival: Optional[np.ndarray] = None


@dataclass(frozen=True)
class StageSampleSet:
    """Observations per retained cycle: Q(A_i) (cycles, I, K) and B_i, V_i (cycles, I)."""

    queue: np.ndarray
    busy: np.ndarray
    switch: np.ndarray
    cycles: int
    warmup: int
    seed: int
    replication: object = None
    method: str = "stage"
    initial: Optional[tuple] = None

    @property
    def observations(self) -> int:
        return self.queue.shape[0]

    @property
    def cycle_lengths(self) -> np.ndarray:
        return self.busy.sum(axis=1) + self.switch.sum(axis=1)

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        for arr in (self.queue, self.busy, self.switch):
            a = np.ascontiguousarray(arr)
            h.update(str(a.dtype).encode())
            h.update(str(a.shape).encode())
            h.update(a.tobytes())
        return h.hexdigest()


def make_rng(seed: int, replication=None) -> np.random.Generator:
    """Stream for (seed, replication); replication r is SeedSequence(seed, spawn_key=(r,)).

    ``replication`` may also be a tuple, used verbatim as the spawn key.
    """
    if replication is None:
        key = ()
    elif isinstance(replication, tuple):
        key = tuple(int(v) for v in replication)
    else:
        key = (int(replication),)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def _drain(rng, m: int, lam: float, service) -> float:
    """Total length of m independent M/G/1 busy periods."""
    total = 0.0
    while m > 0:
        t = service.sample_sum(rng, m)
        total += t
        m = int(rng.poisson(lam * t)) if lam > 0 else 0
    return total


def _stage_engine(model: SystemModel, policy, cycles: int, q0: np.ndarray, rng):
    I, K = model.I, model.K
    lam = model.lam_arr
    table = [model.table.queue(i) for i in range(I)]
    queue = np.empty((cycles, I, K), dtype=np.int64)
    busy = np.empty((cycles, I))
    switch = np.empty((cycles, I))
    Q = q0.astype(np.int64).copy()
    kind = policy.kind
    ratio = getattr(policy, "r", None)
    levels = getattr(policy, "y", None)

    for c in range(cycles):
        for i in range(I):
            queue[c, i] = Q
            p = table[i]
            n = int(Q[p])
            svc = model.service[p]
            if kind == "bep":
                y = int(rng.binomial(n, ratio[i])) if n > 0 else 0
                b = _drain(rng, y, lam[p], svc)
                Q[p] = n - y
                arrivals = rng.poisson(lam * b)
                arrivals[p] = 0
                Q += arrivals
            elif kind == "bgp":
                y = int(rng.binomial(n, ratio[i])) if n > 0 else 0
                b = svc.sample_sum(rng, y)
                Q[p] = n - y
                Q += rng.poisson(lam * b)
            else:
                target = levels[i]
                if n > target:
                    b = _drain(rng, n - target, lam[p], svc)
                    Q[p] = target
                    arrivals = rng.poisson(lam * b)
                    arrivals[p] = 0
                    Q += arrivals
                else:
                    b = 0.0
            v = float(model.switchover[i].sample(rng))
            Q += rng.poisson(lam * v)
            busy[c, i] = b
            switch[c, i] = v
    return queue, busy, switch


class _EventRunner:
    def __init__(self, model: SystemModel, state: SimState):
        self.model = model
        self.s = state
        self.lam = model.lam_arr
        self.inv = np.where(self.lam > 0, 1.0 / np.maximum(self.lam, 1e-300), np.inf)
        if state.next_arrival is None:
            state.next_arrival = np.array([
                state.clock + state.rng.exponential(self.inv[k]) if self.lam[k] > 0 else np.inf
                for k in range(model.K)])

    def advance(self, t: float):
        """Move the clock to t, admitting arrivals strictly before t.

        An arrival at exactly t stays pending, so a departure at t is
        processed first.
        """
        s = self.s
        for k in range(self.model.K):
            while s.next_arrival[k] < t:
                s.queue_lengths[k] += 1
                s.next_arrival[k] += s.rng.exponential(self.inv[k])
        s.clock = t

    def serve_one(self, p: int):
        s = self.s
        self.advance(s.clock + float(self.model.service[p].sample(s.rng)))
        s.queue_lengths[p] -= 1


def _event_engine(model: SystemModel, policy, cycles: int, q0: np.ndarray, rng):
    I, K = model.I, model.K
    queue = np.empty((cycles, I, K), dtype=np.int64)
    busy = np.empty((cycles, I))
    switch = np.empty((cycles, I))
    state = SimState(0.0, q0.astype(np.int64).copy(), 0, rng)
    run = _EventRunner(model, state)
    Q = state.queue_lengths
    for c in range(cycles):
        for i in range(I):
            state.stage = i
            queue[c, i] = Q
            p = model.table.queue(i)
            n = int(Q[p])
            start = state.clock
            if policy.kind == "bep":
                y = int(rng.binomial(n, policy.r[i])) if n > 0 else 0
                while Q[p] > n - y:
                    run.serve_one(p)
            elif policy.kind == "bgp":
                y = int(rng.binomial(n, policy.r[i])) if n > 0 else 0
                for _ in range(y):
                    run.serve_one(p)
            else:
                while Q[p] > policy.y[i]:
                    run.serve_one(p)
            busy[c, i] = state.clock - start
            v = float(model.switchover[i].sample(rng))
            run.advance(state.clock + v)
            switch[c, i] = v
    return queue, busy, switch


def simulate(model: SystemModel, policy, cycles: int, warmup: Optional[int] = None,
             seed: int = 0, initial: Optional[Sequence[int]] = None, method: str = "stage",
             replication=None) -> StageSampleSet:
    """Simulate ``cycles`` polling cycles and keep the last ``cycles - warmup``.

    ``initial`` is the queue vector at the first stage-1 polling epoch
    (empty system by default).  ``warmup`` defaults to 0 when ``initial`` is
    given and to 10% of ``cycles`` otherwise.
    """
    require_valid(model, policy)
    if method not in METHODS:
        raise ValueError(f"unknown simulation method {method!r}; expected one of {METHODS}")
    if warmup is None:
        warmup = 0 if initial is not None else cycles // 10
    if cycles <= 0 or warmup < 0 or cycles <= warmup:
        raise ValueError(f"need cycles > warmup >= 0, got cycles={cycles}, warmup={warmup}")
    q0 = np.zeros(model.K, dtype=np.int64) if initial is None else np.asarray(initial, dtype=np.int64)
    if q0.shape != (model.K,) or np.any(q0 < 0):
        raise ValueError(f"initial state must be {model.K} nonnegative integers, got {initial}")
    rng = make_rng(seed, replication)
    engine = _stage_engine if method == "stage" else _event_engine
    queue, busy, switch = engine(model, policy, cycles, q0, rng)
    return StageSampleSet(queue[warmup:], busy[warmup:], switch[warmup:], cycles, warmup, int(seed),
                          replication, method, None if initial is None else tuple(int(v) for v in q0))
