"""Joint PGF of the queue lengths at polling epochs under BEP.

The PGF at stage i is an infinite product of switchover LSTs evaluated along
a backward recursion through the polling table.  All arithmetic is done on
deficits x_k = 1 - z_k, so arguments close to z = 1 keep full relative
precision; this is what makes finite-difference moments usable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import NonConvergenceError, _ratios, cycle_contraction
from .model import BEP, DistributionSpec, SystemModel, require_valid

DEFAULT_TAIL_TOL = 1e-12
TRUNCATION_LIMIT = 1e-9


def busy_period_lst_complement(lam: float, service: DistributionSpec, u: float,
                               tol: float = 1e-15, max_iters: int = 100_000) -> float:
    """1 - E[exp(-u Theta)] for an M/G/1 busy period started by one customer.

    Iterates psi <- 1 - S(u + lam psi) from psi = 1, which is the iteration
    theta <- S(u + lam - lam theta) from theta = 0 written for 1 - theta.  The
    sequence decreases monotonically to the minimal root of theta.
    """
    if u < 0:
        raise ValueError(f"LST argument must be nonnegative, got {u}")
    if lam * service.mean() >= 1:
        raise ValueError("busy period LST needs lam * E[S] < 1")
    if u == 0:
        return 0.0
    psi = 1.0
    for _ in range(max_iters):
        nxt = service.lst_complement(u + lam * psi)
        if abs(nxt - psi) <= tol * nxt:
            return nxt
        psi = nxt
    raise NonConvergenceError(f"busy-period LST did not converge at u = {u}")


def busy_period_lst(lam: float, service: DistributionSpec, u: float, tol: float = 1e-15,
                    max_iters: int = 100_000) -> float:
    """E[exp(-u Theta)] for an M/G/1 busy period; the minimal root of theta = S(u + lam - lam theta)."""
    return 1.0 - busy_period_lst_complement(lam, service, u, tol, max_iters)


@dataclass(frozen=True)
class RecursionState:
    j: int
    stage: int          # stage w(i, j) whose queue was updated at this step
    deficit: np.ndarray  # 1 - z^{(j)}
    y: float            # sum_k lam_k (1 - z_k^{(j)})

    @property
    def z(self) -> np.ndarray:
        return 1.0 - self.deficit


class _Recursion:
    """Deficit recursion x^{(j)} driven backward through the polling table from a fixed stage."""

    def __init__(self, model: SystemModel, r, stage: int):
        self.model = model
        self.r = _ratios(model, r)
        self.stage = stage
        self.lam = model.lam_arr

    def step(self, x: np.ndarray, j: int):
        m = self.model
        w = m.table.lookback(self.stage, j)
        p = m.table.queue(w)
        rw = self.r[w]
        if rw > 0:
            u = float(self.lam @ x - self.lam[p] * x[p])
            psi = busy_period_lst_complement(self.lam[p], m.service[p], max(u, 0.0))
            x = x.copy()
            x[p] = (1 - rw) * x[p] + rw * psi
        return x, w


def pgf_recursion(model: SystemModel, r, stage: int, z0: Sequence[float], steps: int,
                  deficit: Optional[Sequence[float]] = None) -> list:
    """States j = 1..steps of the recursion started at ``z0`` for the PGF at ``stage``.

    ``deficit`` may be given instead of ``z0`` to specify 1 - z0 directly.
    """
    x = _initial_deficit(model, z0, deficit)
    rec = _Recursion(model, r, stage)
    lam = model.lam_arr
    out = []
    for j in range(1, steps + 1):
        x, w = rec.step(x, j)
        out.append(RecursionState(j, w, x, float(lam @ x)))
    return out


def _initial_deficit(model, z, deficit):
    if deficit is not None:
        x = np.asarray(deficit, dtype=float)
    else:
        z = np.asarray(z, dtype=float)
        if np.any((z < 0) | (z > 1)):
            raise ValueError(f"PGF argument must lie in [0, 1]^K, got {z}")
        x = 1.0 - z
    if x.shape != (model.K,):
        raise ValueError(f"expected a {model.K}-vector, got shape {x.shape}")
    if np.any((x < 0) | (x > 1)):
        raise ValueError(f"deficits must lie in [0, 1], got {x}")
    return x


@dataclass(frozen=True)
class PGFValue:
    value: float
    log_value: float
    steps: int
    truncation_bound: float


def evaluate_pgf_detail(model: SystemModel, r, stage: int, z: Optional[Sequence[float]] = None,
                        tail_tol: float = DEFAULT_TAIL_TOL, max_steps: int = 10**6,
                        deficit: Optional[Sequence[float]] = None) -> PGFValue:
    """Truncated product with its a-priori truncation bound."""
    r = _ratios(model, r)
    require_valid(model, BEP(tuple(r)))
    x = _initial_deficit(model, z, deficit)
    I = model.I
    lam = model.lam_arr
    rho_k = model.rho_k
    ev = model.s
    s_max = float(ev.max())
    contraction = cycle_contraction(model, r, stage)
    rec = _Recursion(model, r, stage)

    log_f = 0.0
    y = float(lam @ x)
    bound = math.inf
    j = 0
    while j < max_steps:
        j += 1
        w = model.table.lookback(stage, j)
        if y > 0:
            log_f += math.log1p(-model.switchover[w].lst_complement(y))
        x, _ = rec.step(x, j)
        y = float(lam @ x)
        if j % I == 0 and y < tail_tol:
            # remaining factors are >= 1 - y E[V]; the rho-scaled deficits shrink by
            # at least `contraction` per cycle, which bounds the sum of the tail
            if y == 0:
                bound = 0.0
                break
            if contraction < 1:
                tilde = float(np.max(lam * x / rho_k))
                bound = s_max * I * model.rho * tilde / (1 - contraction)
                if bound < TRUNCATION_LIMIT:
                    break
    else:
        raise NonConvergenceError(f"PGF truncation bound not reached within {max_steps} steps")
    return PGFValue(math.exp(log_f), log_f, j, bound)


def evaluate_pgf(model: SystemModel, r, stage: int, z: Sequence[float],
                 tail_tol: float = DEFAULT_TAIL_TOL, max_steps: int = 10**6) -> float:
    """F_stage(z), the joint PGF of Q(A_stage) at z in [0, 1]^K."""
    return evaluate_pgf_detail(model, r, stage, z, tail_tol, max_steps).value


def pgf_moment_numeric(model: SystemModel, r, stage: int, queue: int, order: int,
                       h: Optional[float] = None, tail_tol: float = 1e-20) -> float:
    """Factorial moment of Q_queue(A_stage) from one-sided differences of the PGF.

    Differences along coordinate ``queue`` at z = 1 with steps h and h/2,
    combined by Richardson extrapolation.  The default step is 1e-4 divided
    by a rough estimate of the mean, so h * E[Q] stays small for large queues.
    """
    if order not in (1, 2):
        raise ValueError(f"numeric PGF moments support orders 1 and 2, got {order}")
    K = model.K

    def G(t):
        x = np.zeros(K)
        x[queue] = t
        if t == 0:
            return 1.0
        return evaluate_pgf_detail(model, r, stage, deficit=x, tail_tol=tail_tol).value

    def D(step):
        if step <= 0 or 1.0 - 3 * step == 1.0:
            raise FloatingPointError(f"finite-difference step {step} underflows")
        g = [G(m * step) for m in range(4)]
        if order == 1:
            return (3 * g[0] - 4 * g[1] + g[2]) / (2 * step)
        return (2 * g[0] - 5 * g[1] + 4 * g[2] - g[3]) / step**2

    if h is None:
        probe = 1e-7
        mean = (1.0 - G(probe)) / probe
        h = 1e-4 / max(1.0, mean)
    return (4 * D(h / 2) - D(h)) / 3
