"""Exact queue-length moments at polling epochs under BEP.

The first- and second-order buffer-occupancy equations are solved by
successive application of the per-stage affine maps around the polling
table, starting from the stage-1 polling epoch.  Each full cycle of maps is
a contraction, so the iteration converges to the unique solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import BEP, SystemModel, require_valid

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITERS = 10**6


class NonConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


@dataclass(frozen=True)
class BusyPeriodMoments:
    mean: float
    second: float


def mg1_busy_period_moments(lam: float, service) -> BusyPeriodMoments:
    """First two moments of an M/G/1 busy period started by one customer."""
    es, es2 = service.mean(), service.second_moment()
    rho = lam * es
    if rho >= 1:
        raise ValueError(f"busy period is not proper: load {rho:.6g} >= 1")
    return BusyPeriodMoments(es / (1 - rho), es2 / (1 - rho) ** 3)


def _ratios(model: SystemModel, r) -> np.ndarray:
    if isinstance(r, BEP):
        r = r.r
    r = np.asarray(r, dtype=float)
    if r.shape != (model.I,):
        raise ValueError(f"expected {model.I} service ratios, got shape {r.shape}")
    return r


@dataclass(frozen=True)
class FirstMomentSolution:
    """q[i, k] = E[Q_k(A_i)], plus cycle length and mean busy time per stage."""

    q: np.ndarray
    cycle_length: float
    busy: np.ndarray
    iterations: int = 0

    def to_rows(self):
        I, K = self.q.shape
        return [(i + 1, k + 1, float(self.q[i, k])) for i in range(I) for k in range(K)]


@dataclass(frozen=True)
class SecondMomentSolution:
    """F[i, j, k] = f_i(j, k): factorial moment on the diagonal, cross moment off it."""

    F: np.ndarray
    q: np.ndarray
    iterations: int = 0

    def second_moment(self, i: int, k: int) -> float:
        return float(self.F[i, k, k] + self.q[i, k])

    def cross_moment(self, i: int, j: int, k: int) -> float:
        if j == k:
            raise ValueError("cross_moment needs j != k; use second_moment")
        return float(self.F[i, j, k])

    @property
    def second_moments(self) -> np.ndarray:
        """E[Q_k(A_i)^2] as an (I, K) array."""
        return np.einsum("ikk->ik", self.F) + self.q

    def to_rows(self):
        I, K, _ = self.F.shape
        return [(i + 1, j + 1, k + 1, float(self.F[i, j, k]))
                for i in range(I) for j in range(K) for k in range(K)]


def _iterate(cycle, x, tol, max_iters, what):
    """Apply ``cycle`` until the max-norm change is below tol * max(1, |x|).

    Once the tolerance is met, iteration continues while the change keeps
    shrinking, so the result sits at the round-off floor of the contraction.
    """
    converged = False
    last = np.inf
    for it in range(1, max_iters + 1):
        nxt = cycle(x)
        delta = float(np.max(np.abs(nxt - x)))
        x = nxt
        if not converged:
            converged = delta < tol * max(1.0, float(np.max(np.abs(x))))
        elif delta == 0 or delta >= last:
            return x, it
        last = delta
    if converged:
        return x, max_iters
    raise NonConvergenceError(f"{what} iteration did not converge in {max_iters} cycles")


def first_order_stage_maps(model: SystemModel, r) -> list:
    """Affine maps g_{i+1} = A_i g_i + c_i in the scaled variables g = q / mu."""
    r = _ratios(model, r)
    rho_k = model.rho_k
    s = model.s
    maps = []
    for i in range(model.I):
        p = model.table.queue(i)
        A = np.eye(model.K)
        A[p, p] = 1 - r[i]
        for k in range(model.K):
            if k != p:
                A[k, p] = r[i] * rho_k[k] / (1 - rho_k[p])
        maps.append((A, s[i] * rho_k))
    return maps


def _busy_and_cycle(model: SystemModel, r: np.ndarray, q: np.ndarray):
    busy = np.empty(model.I)
    for i in range(model.I):
        p = model.table.queue(i)
        theta = mg1_busy_period_moments(model.lam[p], model.service[p]).mean
        busy[i] = r[i] * q[i, p] * theta
    return busy, model.s_total / (1 - model.rho)


def solve_first_order(model: SystemModel, r, tol: float = DEFAULT_TOL,
                      max_iters: int = DEFAULT_MAX_ITERS, q0: Optional[Sequence[float]] = None,
                      method: str = "iterate") -> FirstMomentSolution:
    """Solve the IK first-order buffer-occupancy equations.

    ``method="iterate"`` applies the stage maps cycle after cycle from ``q0``
    (default zero) at the stage-1 polling epoch until the max-norm change
    over a cycle falls below ``tol`` relative to the iterate's magnitude.
    ``method="direct"`` solves the stacked linear system instead.
    """
    require_valid(model, BEP(tuple(_ratios(model, r))))
    r = _ratios(model, r)
    mu = model.mu
    maps = first_order_stage_maps(model, r)
    I, K = model.I, model.K

    if method == "direct":
        n = I * K
        M = np.eye(n)
        rhs = np.zeros(n)
        for i, (A, c) in enumerate(maps):
            nxt = (i + 1) % I
            M[nxt * K:(nxt + 1) * K, i * K:(i + 1) * K] -= A
            rhs[nxt * K:(nxt + 1) * K] = c
        g = np.linalg.solve(M, rhs).reshape(I, K)
        q = g * mu
        busy, cycle = _busy_and_cycle(model, r, q)
        return FirstMomentSolution(q, cycle, busy, 0)
    if method != "iterate":
        raise ValueError(f"unknown method {method!r}")

    def cycle(g):
        for A, c in maps:
            g = A @ g + c
        return g

    g0 = np.zeros(K) if q0 is None else np.asarray(q0, dtype=float) / mu
    g1, it = _iterate(cycle, g0, tol, max_iters, "first-order")

    gs = np.empty((I, K))
    gs[0] = g1
    for i in range(I - 1):
        A, c = maps[i]
        gs[i + 1] = A @ gs[i] + c
    q = gs * mu
    busy, cycle = _busy_and_cycle(model, r, q)
    return FirstMomentSolution(q, cycle, busy, it)


def _cyclic_sum(values: np.ndarray, start: int, stop: int) -> float:
    """Sum values[start], values[start+1], ..., values[stop-1] with wraparound."""
    K = len(values)
    total, l = 0.0, start
    while l != stop % K:
        total += values[l]
        l = (l + 1) % K
    return total


def closed_form_cyclic(model: SystemModel, r) -> FirstMomentSolution:
    """First moments for a cyclic table (each queue visited once, in order)."""
    if not model.table.is_cyclic:
        raise ValueError("closed form requires a cyclic polling table (I = K, p(i) = i)")
    r = _ratios(model, r)
    if np.any(r <= 0):
        raise ValueError("closed form requires every service ratio to be positive")
    require_valid(model, BEP(tuple(r)))
    lam, rho_k, s = model.lam_arr, model.rho_k, model.s
    rho, s_tot = model.rho, model.s_total
    K = model.K
    cyc = s_tot / (1 - rho)
    q = np.empty((K, K))
    for k in range(K):
        for j in range(K):
            own = (1 - rho_k[j]) / r[j] * cyc
            if j == k:
                q[k, j] = lam[j] * own
            else:
                q[k, j] = lam[j] * (own - _cyclic_sum(s, k, j) - _cyclic_sum(rho_k, k, j) * cyc)
    busy, cycle = _busy_and_cycle(model, r, q)
    return FirstMomentSolution(q, cycle, busy, 0)


def second_order_stage(F: np.ndarray, f: np.ndarray, p: int, r: float, lam: np.ndarray,
                       s: float, ev2: float, et: float, et2: float) -> np.ndarray:
    """One application of the second-order map F_i -> F_{i+1}.

    ``f`` holds the first moments at stage i, ``p`` the visited queue,
    ``et``/``et2`` the busy-period moments of that queue and ``s``/``ev2``
    the switchover moments out of the stage.
    """
    c = r * et
    fp = f[p]
    lj = lam[:, None]
    lk = lam[None, :]
    ll = lj * lk
    Fp = F[p]
    # neither index is the visited queue
    out = (ll * ev2 + s * (lk * f[:, None] + lj * f[None, :]) + 2 * ll * s * fp * c
           + F + lj * Fp[None, :] * c + lk * Fp[:, None] * c
           + ll * F[p, p] * c * c + ll * fp * r * et2)
    # j = p != k
    row = (lam[p] * lam * ev2 + lam * s * fp * (1 - r) + lam[p] * s * f
           + lam[p] * lam * s * fp * c + Fp * (1 - r) + lam * F[p, p] * r * (1 - r) * et)
    # k = p != j
    col = (lam[p] * lam * ev2 + lam * s * fp * (1 - r) + lam[p] * s * f
           + lam[p] * lam * s * fp * c + F[:, p] * (1 - r) + lam * F[p, p] * r * (1 - r) * et)
    out[p, :] = row
    out[:, p] = col
    out[p, p] = lam[p] ** 2 * ev2 + 2 * lam[p] * s * fp * (1 - r) + F[p, p] * (1 - r) ** 2
    return out


def solve_second_order(model: SystemModel, r, first: Optional[FirstMomentSolution] = None,
                       tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                       F0: Optional[np.ndarray] = None) -> SecondMomentSolution:
    """Fixed point of the second-order buffer-occupancy map over one cycle.

    Iterates from the zero matrix (or ``F0``) at stage 1 until the max-norm
    change over one cycle is below ``tol`` relative to the iterate.
    """
    r = _ratios(model, r)
    if first is None:
        first = solve_first_order(model, r, tol=tol)
    q = first.q
    lam = model.lam_arr
    I, K = model.I, model.K
    consts = []
    for i in range(I):
        p = model.table.queue(i)
        bp = mg1_busy_period_moments(lam[p], model.service[p])
        sw = model.switchover[i]
        consts.append((p, r[i], sw.mean(), sw.second_moment(), bp.mean, bp.second))

    def cycle(F1):
        Fs = [F1]
        F = F1
        for i, (p, ri, si, ev2, et, et2) in enumerate(consts):
            F = second_order_stage(F, q[i], p, ri, lam, si, ev2, et, et2)
            Fs.append(F)
        return Fs

    F0 = np.zeros((K, K)) if F0 is None else np.array(F0, dtype=float)
    F1, it = _iterate(lambda F: cycle(F)[-1], F0, tol, max_iters, "second-order")
    Fs = cycle(F1)
    F = np.stack(Fs[:I])
    return SecondMomentSolution(F, q, it)


def busy_second_moments(model: SystemModel, r, second: SecondMomentSolution) -> np.ndarray:
    """Exact E[B_i^2] from the queue moments at the polling epochs."""
    r = _ratios(model, r)
    out = np.empty(model.I)
    for i in range(model.I):
        p = model.table.queue(i)
        bp = mg1_busy_period_moments(model.lam[p], model.service[p])
        out[i] = second.F[i, p, p] * (r[i] * bp.mean) ** 2 + second.q[i, p] * r[i] * bp.second
    return out


# contraction diagnostics ----------------------------------------------------


@dataclass(frozen=True)
class ContractionReport:
    alpha: float
    m_bar: np.ndarray       # (I, K, K) unscaled bounding matrices per stage
    m_tilde: np.ndarray     # (I, K, K) rho-weighted matrices per stage
    row_sums: np.ndarray    # (I, L, K): row sums of the first l products from stage i
    d: np.ndarray           # (I, K): first step l >= 1 at which row k can drop below 1

    @property
    def cycle_norm(self) -> np.ndarray:
        """Max row sum of the full-cycle product for each starting stage."""
        I = self.m_tilde.shape[0]
        return self.row_sums[:, I - 1, :].max(axis=1)

    def satisfies_bounds(self, atol: float = 1e-12) -> bool:
        I, L, K = self.row_sums.shape
        for i in range(I):
            for k in range(K):
                rs = self.row_sums[i, :, k]
                if np.any(rs > 1 + atol):
                    return False
                if np.any(rs[self.d[i, k] - 1:] >= 1):
                    return False
        return True


def default_alpha(model: SystemModel) -> float:
    rho = model.rho
    return 0.5 * (1 - rho) / rho


def alpha_admissible(model: SystemModel, alpha: float) -> bool:
    rho_k = model.rho_k
    rho = rho_k.sum()
    return bool(np.all(rho_k + (rho - rho_k) * (1 + alpha) < 1))


def bounding_matrices(model: SystemModel, r, alpha: float):
    """Per-stage matrices (M_bar, M_tilde) for the linearized deficit recursion."""
    r = _ratios(model, r)
    rho_k = model.rho_k
    K = model.K
    mb, mt = [], []
    for l in range(model.I):
        p = model.table.queue(l)
        A = np.eye(K)
        B = np.eye(K)
        for k in range(K):
            if k == p:
                A[p, p] = B[p, p] = 1 - r[l]
            else:
                A[p, k] = r[l] * rho_k[p] * (1 + alpha) / (1 - rho_k[p])
                B[p, k] = r[l] * rho_k[k] * (1 + alpha) / (1 - rho_k[p])
        mb.append(A)
        mt.append(B)
    return np.stack(mb), np.stack(mt)


def contraction_diagnostics(model: SystemModel, r, alpha: Optional[float] = None,
                            horizon: Optional[int] = None) -> ContractionReport:
    """Row sums of cumulative products M_{w(i,l)} ... M_{w(i,1)} for every stage i."""
    r = _ratios(model, r)
    if alpha is None:
        alpha = default_alpha(model)
    if alpha <= 0 or not alpha_admissible(model, alpha):
        raise ValueError(f"alpha = {alpha} violates rho_k + (1 + alpha) sum_(l != k) rho_l < 1")
    mb, mt = bounding_matrices(model, r, alpha)
    I, K = model.I, model.K
    L = I if horizon is None else horizon
    row_sums = np.empty((I, L, K))
    d = np.zeros((I, K), dtype=int)
    tab = model.table
    for i in range(I):
        P = np.eye(K)
        for l in range(1, L + 1):
            stage = tab.lookback(i, l)
            P = mt[stage] @ P
            row_sums[i, l - 1] = P.sum(axis=1)
        for k in range(K):
            for l in range(1, I + 1):
                w = tab.lookback(i, l)
                if tab.queue(w) == k and r[w] > 0:
                    d[i, k] = l
                    break
    return ContractionReport(alpha, mb, mt, row_sums, d)


def cycle_contraction(model: SystemModel, r, stage: int, alpha: float = 0.0) -> float:
    """Max row sum of the full-cycle M_tilde product seen from ``stage``."""
    _, mt = bounding_matrices(model, r, alpha)
    P = np.eye(model.K)
    for l in range(1, model.I + 1):
        P = mt[model.table.lookback(stage, l)] @ P
    return float(P.sum(axis=1).max())


def write_first_csv(sol: FirstMomentSolution, fh):
    fh.write("stage,queue,q\n")
    for i, k, v in sol.to_rows():
        fh.write(f"{i},{k},{v:.15g}\n")


def write_second_csv(sol: SecondMomentSolution, fh):
    fh.write("stage,j,k,f\n")
    for i, j, k, v in sol.to_rows():
        fh.write(f"{i},{j},{k},{v:.15g}\n")
