"""Domain types for single-server polling systems.

Queue and stage indices are 0-based throughout the Python API (they index
numpy arrays directly).  Config files, CSV output and the CLI use 1-based
indices; conversion happens at those boundaries only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

FAMILIES = ("deterministic", "exponential", "erlang", "uniform")


@dataclass(frozen=True)
class DistributionSpec:
    """A nonnegative distribution with closed-form moments and LST.

    ``params`` is family specific:

    * deterministic: ``(value,)``
    * exponential: ``(rate,)``
    * erlang: ``(shape, rate)`` with integer shape
    * uniform: ``(low, high)`` with ``0 <= low <= high``
    """

    family: str
    params: tuple

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        p = self.params
        if fam == "deterministic":
            _need(len(p) == 1 and p[0] >= 0, f"deterministic needs one value >= 0, got {p}")
        elif fam == "exponential":
            _need(len(p) == 1 and p[0] > 0, f"exponential needs a positive rate, got {p}")
        elif fam == "erlang":
            _need(len(p) == 2 and p[0] >= 1 and float(p[0]).is_integer() and p[1] > 0,
                  f"erlang needs (integer shape >= 1, rate > 0), got {p}")
        elif fam == "uniform":
            _need(len(p) == 2 and 0 <= p[0] <= p[1], f"uniform needs 0 <= low <= high, got {p}")
        else:
            raise ValueError(f"unknown distribution family {self.family!r}; expected one of {FAMILIES}")

    # constructors -----------------------------------------------------------

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls("deterministic", (value,))

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls("exponential", (rate,))

    @classmethod
    def erlang(cls, shape: int, rate: float) -> "DistributionSpec":
        return cls("erlang", (shape, rate))

    @classmethod
    def uniform(cls, low: float, high: float) -> "DistributionSpec":
        return cls("uniform", (low, high))

    # moments ----------------------------------------------------------------

    def mean(self) -> float:
        return self.moment(1)

    def second_moment(self) -> float:
        return self.moment(2)

    def moment(self, order: int) -> float:
        """Exact raw moment of order 1 or 2."""
        if order not in (1, 2):
            raise ValueError(f"only moments of order 1 and 2 are supported, got {order}")
        fam, p = self.family, self.params
        if fam == "deterministic":
            return p[0] ** order
        if fam == "exponential":
            return math.factorial(order) / p[0] ** order
        if fam == "erlang":
            k, rate = p
            return k / rate if order == 1 else k * (k + 1) / rate**2
        a, b = p
        return (a + b) / 2 if order == 1 else (a * a + a * b + b * b) / 3

    # transforms -------------------------------------------------------------

    def lst(self, u: float) -> float:
        """E[exp(-u X)] for u >= 0."""
        if u < 0:
            raise ValueError(f"LST argument must be nonnegative, got {u}")
        fam, p = self.family, self.params
        if fam == "deterministic":
            return math.exp(-u * p[0])
        if fam == "exponential":
            return p[0] / (p[0] + u)
        if fam == "erlang":
            k, rate = p
            return math.exp(-k * math.log1p(u / rate))
        a, b = p
        t = u * (b - a)
        if t < 1e-3:
            # (1 - e^-t)/t by series
            return math.exp(-u * a) * (1 - t / 2 + t * t / 6 - t**3 / 24 + t**4 / 120)
        return math.exp(-u * a) * (-math.expm1(-t)) / t

    def lst_complement(self, u: float) -> float:
        """1 - E[exp(-u X)], computed without cancellation for small u."""
        if u < 0:
            raise ValueError(f"LST argument must be nonnegative, got {u}")
        if u == 0:
            return 0.0
        fam, p = self.family, self.params
        if fam == "deterministic":
            return -math.expm1(-u * p[0])
        if fam == "exponential":
            return u / (p[0] + u)
        if fam == "erlang":
            k, rate = p
            return -math.expm1(-k * math.log1p(u / rate))
        a, b = p
        t = u * (b - a)
        # 1 - (1 - e^-t)/t, series below 1e-3 to avoid cancellation
        if t < 1e-3:
            tail = t / 2 - t * t / 6 + t**3 / 24 - t**4 / 120
        else:
            tail = (t + math.expm1(-t)) / t
        return -math.expm1(-u * a) + math.exp(-u * a) * tail

    # sampling ---------------------------------------------------------------

    def sample(self, rng: np.random.Generator, size=None):
        fam, p = self.family, self.params
        if fam == "deterministic":
            return p[0] if size is None else np.full(size, p[0])
        if fam == "exponential":
            return rng.exponential(1.0 / p[0], size)
        if fam == "erlang":
            return rng.gamma(p[0], 1.0 / p[1], size)
        return rng.uniform(p[0], p[1], size)

    def sample_sum(self, rng: np.random.Generator, count: int) -> float:
        """Sum of ``count`` i.i.d. draws, exact in distribution."""
        if count <= 0:
            return 0.0
        fam, p = self.family, self.params
        if fam == "deterministic":
            return count * p[0]
        if fam == "exponential":
            return float(rng.gamma(count, 1.0 / p[0]))
        if fam == "erlang":
            return float(rng.gamma(count * p[0], 1.0 / p[1]))
        return float(rng.uniform(p[0], p[1], count).sum())

    def scaled(self, n: float) -> "DistributionSpec":
        """Same family with the mean multiplied by ``n``."""
        fam, p = self.family, self.params
        if fam == "deterministic":
            return DistributionSpec(fam, (p[0] * n,))
        if fam == "exponential":
            return DistributionSpec(fam, (p[0] / n,))
        if fam == "erlang":
            return DistributionSpec(fam, (p[0], p[1] / n))
        return DistributionSpec(fam, (p[0] * n, p[1] * n))

    def to_dict(self) -> dict:
        names = {
            "deterministic": ("value",),
            "exponential": ("rate",),
            "erlang": ("shape", "rate"),
            "uniform": ("low", "high"),
        }[self.family]
        params = {k: v for k, v in zip(names, self.params)}
        if self.family == "erlang":
            params["shape"] = int(params["shape"])
        return {"family": self.family, "params": params}


def _need(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class PollingTable:
    """Stage -> queue mapping of a polling table (0-based)."""

    stages: tuple
    num_queues: int

    def __post_init__(self):
        stages = tuple(int(q) for q in self.stages)
        object.__setattr__(self, "stages", stages)
        _need(len(stages) >= 1, "polling table needs at least one stage")
        _need(all(0 <= q < self.num_queues for q in stages),
              f"stage entries must lie in 0..{self.num_queues - 1}, got {stages}")
        missing = sorted(set(range(self.num_queues)) - set(stages))
        _need(not missing, f"queues {[m + 1 for m in missing]} never visited by the polling table")

    @classmethod
    def from_one_based(cls, stages: Sequence[int], num_queues: int | None = None) -> "PollingTable":
        stages = [int(s) for s in stages]
        if num_queues is None:
            num_queues = max(stages)
        return cls(tuple(s - 1 for s in stages), num_queues)

    @classmethod
    def cyclic(cls, num_queues: int) -> "PollingTable":
        return cls(tuple(range(num_queues)), num_queues)

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    @property
    def is_cyclic(self) -> bool:
        return self.stages == tuple(range(self.num_queues))

    def queue(self, i: int) -> int:
        return self.stages[i]

    def lookback(self, i: int, j: int) -> int:
        """Stage visited ``j`` stages before stage ``i``, cyclically."""
        return (i - j) % self.num_stages

    def visits(self, k: int) -> list:
        return [i for i, q in enumerate(self.stages) if q == k]

    def to_one_based(self) -> list:
        return [q + 1 for q in self.stages]


@dataclass(frozen=True)
class SystemModel:
    """Arrival rates, service and switchover distributions, polling table."""

    lam: tuple
    service: tuple
    switchover: tuple
    table: PollingTable

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        object.__setattr__(self, "service", tuple(self.service))
        object.__setattr__(self, "switchover", tuple(self.switchover))
        K, I = self.table.num_queues, self.table.num_stages
        _need(len(self.lam) == K, f"expected {K} arrival rates, got {len(self.lam)}")
        _need(len(self.service) == K, f"expected {K} service distributions, got {len(self.service)}")
        _need(len(self.switchover) == I, f"expected {I} switchover distributions, got {len(self.switchover)}")
        _need(all(x >= 0 for x in self.lam), "arrival rates must be nonnegative")

    @property
    def K(self) -> int:
        return self.table.num_queues

    @property
    def I(self) -> int:
        return self.table.num_stages

    @property
    def lam_arr(self) -> np.ndarray:
        return np.array(self.lam)

    @property
    def mean_service(self) -> np.ndarray:
        return np.array([d.mean() for d in self.service])

    @property
    def mu(self) -> np.ndarray:
        return 1.0 / self.mean_service

    @property
    def rho_k(self) -> np.ndarray:
        return self.lam_arr * self.mean_service

    @property
    def rho(self) -> float:
        return float(self.rho_k.sum())

    @property
    def s(self) -> np.ndarray:
        """Mean switchover time out of each stage."""
        return np.array([d.mean() for d in self.switchover])

    @property
    def s_total(self) -> float:
        return float(self.s.sum())

    def scaled(self, n: float) -> "SystemModel":
        """Model with every switchover mean multiplied by ``n``."""
        return SystemModel(self.lam, self.service, tuple(d.scaled(n) for d in self.switchover), self.table)


# policies -------------------------------------------------------------------


@dataclass(frozen=True)
class BEP:
    """Binomial-exhaustive policy with per-stage service ratios."""

    r: tuple

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))

    kind = "bep"

    def scaled(self, n: float) -> "BEP":
        return self


@dataclass(frozen=True)
class BGP:
    """Binomial-gated policy with per-stage service ratios."""

    r: tuple

    def __post_init__(self):
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))

    kind = "bgp"

    def scaled(self, n: float) -> "BGP":
        return self


@dataclass(frozen=True)
class BSP:
    """Base-stock policy: serve the visited queue down to level ``y[i]``."""

    y: tuple

    def __post_init__(self):
        ys = []
        for v in self.y:
            if float(v) != int(v):
                raise ValueError(f"base-stock levels must be integers, got {v}")
            ys.append(int(v))
        object.__setattr__(self, "y", tuple(ys))

    kind = "bsp"

    def scaled(self, n: float) -> "BSP":
        return BSP(tuple(int(round(n * v)) for v in self.y))


Policy = Union[BEP, BGP, BSP]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


def validate(model: SystemModel, policy: Policy) -> list:
    """Return the list of admissibility violations (empty if admissible)."""
    out = []
    K, I = model.K, model.I

    for k, d in enumerate(model.service):
        if d.mean() <= 0:
            out.append(Violation("service", f"queue {k + 1}: service mean must be positive"))
    for k, x in enumerate(model.lam):
        if x <= 0:
            out.append(Violation("arrival", f"queue {k + 1}: arrival rate must be positive"))
    if all(d.mean() > 0 for d in model.service):
        rho = model.rho
        if rho >= 1:
            out.append(Violation("stability", f"total load rho = {rho:.6g} must be < 1"))
    if model.s_total <= 0:
        out.append(Violation("switchover", "total mean switchover time must be positive"))

    if isinstance(policy, (BEP, BGP)):
        r = policy.r
        if len(r) != I:
            out.append(Violation("policy", f"expected {I} service ratios, got {len(r)}"))
        else:
            for i, ri in enumerate(r):
                if not 0.0 <= ri <= 1.0:
                    out.append(Violation("policy", f"stage {i + 1}: r = {ri} outside [0, 1]"))
            for k in range(K):
                if sum(r[i] for i in model.table.visits(k)) <= 0:
                    out.append(Violation("unserved",
                                         f"queue {k + 1}: service ratios sum to 0 over its stages"))
    elif isinstance(policy, BSP):
        if len(policy.y) != I:
            out.append(Violation("policy", f"expected {I} base-stock levels, got {len(policy.y)}"))
        for i, y in enumerate(policy.y):
            if y < 0:
                out.append(Violation("policy", f"stage {i + 1}: base-stock level {y} is negative"))
    else:
        out.append(Violation("policy", f"unknown policy type {type(policy).__name__}"))
    return out


class ValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


def require_valid(model: SystemModel, policy: Policy):
    report = validate(model, policy)
    if report:
        raise ValidationError(report)


def distribution_moment(spec: DistributionSpec, order: int) -> float:
    return spec.moment(order)


def distribution_lst(spec: DistributionSpec, u: float) -> float:
    return spec.lst(u)
