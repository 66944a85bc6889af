"""Fluid periodic equilibria (PE) and the moment approximations built on them.

Each policy induces an affine map per stage on the fluid content at polling
epochs, q(a_{i+1}) = A_i q(a_i) + c_i.  The PE is the fixed point of the
composed cycle map, which exists and is unique when its spectral radius is
below one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import mg1_busy_period_moments
from .model import BEP, BGP, BSP, SystemModel, require_valid


class FluidDivergenceError(RuntimeError):
    """The cycle map has no attracting fixed point."""


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear fluid path; ``times[0] = 0`` is the stage-1 polling epoch."""

    times: np.ndarray
    values: np.ndarray  # (len(times), K)

    def at(self, t: float) -> np.ndarray:
        period = self.times[-1]
        t = float(t) % period if t != period else period
        return np.array([np.interp(t, self.times, self.values[:, k])
                         for k in range(self.values.shape[1])])


@dataclass(frozen=True)
class FluidPE:
    policy: str
    q: np.ndarray            # (I, K) fluid content at polling epochs
    period: float
    stage_busy: np.ndarray   # (I,)
    stage_switch: np.ndarray  # (I,)
    trajectory: Trajectory
    consistent: bool = True  # BSP only: q[i, p(i)] >= Y_i at every stage

    @property
    def departure_levels(self) -> np.ndarray:
        """Fluid content at each departure epoch, shape (I, K)."""
        return self.trajectory.values[1::2][: self.q.shape[0]]


def _stage_maps(model: SystemModel, policy):
    """Per-stage (A_i, c_i, busy coefficients) in the original q coordinates.

    The busy time of stage i is ``beta_i @ q(a_i) + gamma_i``.
    """
    lam, mu = model.lam_arr, model.mu
    K = model.K
    maps = []
    for i in range(model.I):
        p = model.table.queue(i)
        beta = np.zeros(K)
        gamma = 0.0
        if isinstance(policy, BEP):
            beta[p] = policy.r[i] / (mu[p] - lam[p])
        elif isinstance(policy, BGP):
            beta[p] = policy.r[i] / mu[p]
        elif isinstance(policy, BSP):
            beta[p] = 1.0 / (mu[p] - lam[p])
            gamma = -policy.y[i] / (mu[p] - lam[p])
        else:
            raise TypeError(f"unsupported policy {policy!r}")
        # every queue grows at rate lam over busy + switchover; the served one
        # additionally drains at rate mu over the busy time
        A = np.eye(K) + np.outer(lam, beta)
        A[p] -= mu[p] * beta
        c = lam * (model.s[i] + gamma)
        c[p] -= mu[p] * gamma
        maps.append((A, c, beta, gamma))
    return maps


def _solve_pe(model: SystemModel, policy, kind: str) -> FluidPE:
    require_valid(model, policy)
    maps = _stage_maps(model, policy)
    K, I = model.K, model.I
    P = np.eye(K)
    v = np.zeros(K)
    for A, c, _, _ in maps:
        P = A @ P
        v = A @ v + c
    radius = float(np.max(np.abs(np.linalg.eigvals(P))))
    if radius >= 1 - 1e-12:
        raise FluidDivergenceError(
            f"{kind} fluid cycle map has spectral radius {radius:.6g} >= 1; no periodic equilibrium")
    q = np.empty((I, K))
    q[0] = np.linalg.solve(np.eye(K) - P, v)
    busy = np.empty(I)
    for i, (A, c, beta, gamma) in enumerate(maps):
        busy[i] = beta @ q[i] + gamma
        if i + 1 < I:
            q[i + 1] = A @ q[i] + c
    switch = model.s.copy()
    consistent = True
    if isinstance(policy, BSP):
        served = np.array([q[i, model.table.queue(i)] for i in range(I)])
        consistent = bool(np.all(served >= np.asarray(policy.y) - 1e-9 * np.maximum(1, served)))
    traj = _trajectory(model, q, busy, switch)
    return FluidPE(kind, q, float(np.sum(busy + switch)), busy, switch, traj, consistent)


def _trajectory(model: SystemModel, q, busy, switch) -> Trajectory:
    lam, mu = model.lam_arr, model.mu
    times, values = [0.0], [q[0].copy()]
    t, x = 0.0, q[0].copy()
    for i in range(model.I):
        p = model.table.queue(i)
        slope = lam.copy()
        slope[p] -= mu[p]
        t += busy[i]
        x = x + slope * busy[i]
        times.append(t)
        values.append(x.copy())
        t += switch[i]
        x = x + lam * switch[i]
        times.append(t)
        values.append(x.copy())
    return Trajectory(np.array(times), np.array(values))


def fluid_pe_bep(model: SystemModel, r) -> FluidPE:
    """PE under BEP: a fraction r_i of the content is drained at net rate mu - lam."""
    return _solve_pe(model, r if isinstance(r, BEP) else BEP(tuple(r)), "bep")


def fluid_pe_bgp(model: SystemModel, r) -> FluidPE:
    """PE under BGP: a fraction r_i of the content at the polling epoch is served at rate mu."""
    return _solve_pe(model, r if isinstance(r, BGP) else BGP(tuple(r)), "bgp")


def fluid_pe_bsp(model: SystemModel, y) -> FluidPE:
    """PE under BSP: the visited queue is drained down to Y_i.

    ``consistent`` is False when some stage finds less than Y_i, in which
    case the balance equations do not describe a feasible fluid path.
    """
    return _solve_pe(model, y if isinstance(y, BSP) else BSP(tuple(y)), "bsp")


def fluid_pe(model: SystemModel, policy) -> FluidPE:
    if isinstance(policy, BEP):
        return fluid_pe_bep(model, policy)
    if isinstance(policy, BGP):
        return fluid_pe_bgp(model, policy)
    if isinstance(policy, BSP):
        return fluid_pe_bsp(model, policy)
    raise TypeError(f"unsupported policy {policy!r}")


def drained_mass(model: SystemModel, pe: FluidPE) -> np.ndarray:
    """Mass removed from each queue over one period (service rate times busy time)."""
    out = np.zeros(model.K)
    for i in range(model.I):
        p = model.table.queue(i)
        out[p] += model.mu[p] * pe.stage_busy[i]
    return out


@dataclass(frozen=True)
class AsymptoticApproximation:
    n: float
    p: int
    queue: np.ndarray  # (I, K): (n q)^p
    busy: np.ndarray   # (I,): (n b)^p


def bep_busy_means(model: SystemModel, q: np.ndarray, r) -> np.ndarray:
    """b_i = r_i q_{p(i)}(a_i) E[Theta_{p(i)}]."""
    r = r.r if isinstance(r, BEP) else r
    out = np.empty(model.I)
    for i in range(model.I):
        p = model.table.queue(i)
        out[i] = r[i] * q[i, p] * mg1_busy_period_moments(model.lam[p], model.service[p]).mean
    return out


def approximate_moments(pe: FluidPE, n: float, p: int,
                        model: Optional[SystemModel] = None, r=None) -> AsymptoticApproximation:
    """(n q)^p for queue lengths and (n b)^p for busy times.

    For BEP the busy mean b_i = r_i q E[Theta] may be supplied through
    ``model`` and ``r``; it coincides with the fluid stage busy time.
    """
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p}")
    if n <= 0:
        raise ValueError(f"scale must be positive, got {n}")
    b = pe.stage_busy
    if pe.policy == "bep" and model is not None and r is not None:
        b = bep_busy_means(model, pe.q, r)
    return AsymptoticApproximation(n, p, (n * pe.q) ** p, (n * b) ** p)


def write_pe_csv(model: SystemModel, pe: FluidPE, fh):
    """Breakpoints (time, q_1..q_K) followed by a summary block."""
    K = model.K
    fh.write("time," + ",".join(f"q_{k + 1}" for k in range(K)) + "\n")
    for t, row in zip(pe.trajectory.times, pe.trajectory.values):
        fh.write(f"{t:.15g}," + ",".join(f"{v:.15g}" for v in row) + "\n")
    fh.write("\n")
    fh.write(f"policy,{pe.policy}\n")
    fh.write(f"period,{pe.period:.15g}\n")
    fh.write(f"consistent,{str(pe.consistent).lower()}\n")
    fh.write("stage,busy,switchover," + ",".join(f"q_{k + 1}" for k in range(K)) + "\n")
    for i in range(model.I):
        fh.write(f"{i + 1},{pe.stage_busy[i]:.15g},{pe.stage_switch[i]:.15g},"
                 + ",".join(f"{v:.15g}" for v in pe.q[i]) + "\n")
