import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import THREE_Q_R, busy_periods_mc, random_admissible
from polling_moments.analysis import mg1_busy_period_moments, solve_first_order, solve_second_order
from polling_moments.model import DistributionSpec as D
from polling_moments.pgf import (
    busy_period_lst,
    evaluate_pgf,
    evaluate_pgf_detail,
    pgf_moment_numeric,
    pgf_recursion,
)


def test_busy_period_lst_at_zero():
    assert busy_period_lst(2, D.exponential(8), 0.0) == 1.0


def test_busy_period_lst_exponential_closed_form():
    # M/M/1: theta(u) = (lam + mu + u - sqrt((lam + mu + u)^2 - 4 lam mu)) / (2 lam)
    lam, mu = 2.0, 8.0
    for u in (0.01, 0.5, 3.0):
        b = lam + mu + u
        exact = (b - math.sqrt(b * b - 4 * lam * mu)) / (2 * lam)
        assert busy_period_lst(lam, D.exponential(mu), u) == pytest.approx(exact, rel=1e-13)


def test_busy_period_lst_derivative_is_mean():
    h = 1e-6
    lam, svc = 2.0, D.exponential(8)
    deriv = (busy_period_lst(lam, svc, h) - busy_period_lst(lam, svc, 0.0)) / h
    central = -(busy_period_lst(lam, svc, 2 * h) - busy_period_lst(lam, svc, 0.0)) / (2 * h)
    mean = mg1_busy_period_moments(lam, svc).mean
    assert -deriv == pytest.approx(mean, rel=1e-5)
    assert central == pytest.approx(mean, rel=1e-5)


def test_busy_period_lst_monte_carlo():
    theta = busy_periods_mc(1.0, D.deterministic(0.5), 1_000_000, seed=21)
    x = np.exp(-theta)
    se = x.std() / math.sqrt(x.size)
    assert abs(busy_period_lst(1.0, D.deterministic(0.5), 1.0) - x.mean()) < 3 * se


def test_busy_period_lst_rejects_negative_argument():
    with pytest.raises(ValueError):
        busy_period_lst(1.0, D.exponential(4), -1.0)


def test_recursion_fixed_point_at_one(three_queue):
    states = pgf_recursion(three_queue, THREE_Q_R, 0, [1, 1, 1], 12)
    assert len(states) == 12
    assert all(np.all(s.z == 1) and s.y == 0 for s in states)


def test_recursion_single_queue_collapses(one_queue):
    (s,) = pgf_recursion(one_queue, (1,), 0, [0.3], 1)
    assert s.z[0] == 1 and s.y == 0


def test_recursion_stage_trace_and_decay(three_queue):
    states = pgf_recursion(three_queue, THREE_Q_R, 2, [0.5] * 3, 400)
    assert [s.stage for s in states[:6]] == [1, 0, 4, 3, 2, 1]
    ys = np.array([s.y for s in states])
    assert np.all(ys >= 0)
    assert ys[-1] < 1e-8


def test_recursion_monotone_from_zero(three_queue):
    states = pgf_recursion(three_queue, THREE_Q_R, 0, [0, 0, 0], 60)
    z = np.array([s.z for s in states])
    assert np.all(np.diff(z, axis=0) >= -1e-15)
    assert np.all(np.diff([s.y for s in states]) <= 1e-15)


def test_recursion_not_monotone_from_every_start(three_queue):
    # a start above the busy-period transform moves down first
    states = pgf_recursion(three_queue, THREE_Q_R, 0, [0.2, 0.6, 0.9], 2)
    assert states[1].z[2] < 0.9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_recursion_monotone_from_zero_property(seed):
    rng = np.random.default_rng(seed)
    m, pol = random_admissible(rng, cyclic=False, allow_zero_r=True)
    states = pgf_recursion(m, pol.r, int(rng.integers(m.I)), np.zeros(m.K), 8 * m.I)
    z = np.array([s.z for s in states])
    assert np.all(np.diff(z, axis=0) >= -1e-14)
    ys = np.array([s.y for s in states])
    assert np.all(ys >= 0)
    assert np.all(np.diff(ys) <= 1e-14)


def test_pgf_normalisation_and_range(three_queue):
    assert evaluate_pgf(three_queue, THREE_Q_R, 0, [1, 1, 1]) == 1.0
    for z in ([0.9] * 3, [0.0, 0.5, 1.0], [0.99, 0.2, 0.7]):
        v = evaluate_pgf(three_queue, THREE_Q_R, 3, z)
        assert 0 < v <= 1


def test_pgf_single_queue_poisson(one_queue):
    assert evaluate_pgf(one_queue, (1,), 0, [0.5]) == pytest.approx(math.exp(-0.5), rel=1e-14)


def test_pgf_monotone(three_queue):
    assert evaluate_pgf(three_queue, THREE_Q_R, 0, [0.9] * 3) < evaluate_pgf(three_queue, THREE_Q_R, 0, [0.95] * 3)


def test_pgf_truncation_bound(three_queue):
    det = evaluate_pgf_detail(three_queue, THREE_Q_R, 0, [0.5] * 3)
    assert det.truncation_bound < 1e-9
    assert det.steps % three_queue.I == 0


def test_pgf_rejects_out_of_range(three_queue):
    with pytest.raises(ValueError):
        evaluate_pgf(three_queue, THREE_Q_R, 0, [1.2, 0.5, 0.5])


def test_numeric_moments_single_queue(one_queue):
    assert pgf_moment_numeric(one_queue, (1,), 0, 0, 1) == pytest.approx(1, rel=1e-8)
    assert pgf_moment_numeric(one_queue, (1,), 0, 0, 2) == pytest.approx(1, rel=1e-5)
    with pytest.raises(ValueError):
        pgf_moment_numeric(one_queue, (1,), 0, 0, 3)


def test_numeric_moments_two_queue(two_queue):
    q = solve_first_order(two_queue, (1, 1)).q
    for i in range(2):
        for k in range(2):
            assert pgf_moment_numeric(two_queue, (1, 1), i, k, 1) == pytest.approx(q[i, k], rel=1e-5)


def test_numeric_step_underflow(one_queue):
    with pytest.raises(FloatingPointError):
        pgf_moment_numeric(one_queue, (1,), 0, 0, 1, h=1e-18)


def test_numeric_moments_three_queue(three_queue):
    first = solve_first_order(three_queue, THREE_Q_R)
    second = solve_second_order(three_queue, THREE_Q_R, first)
    for i in range(three_queue.I):
        for k in range(three_queue.K):
            assert pgf_moment_numeric(three_queue, THREE_Q_R, i, k, 1) == pytest.approx(first.q[i, k], rel=1e-5)
            assert pgf_moment_numeric(three_queue, THREE_Q_R, i, k, 2) == pytest.approx(second.F[i, k, k], rel=1e-4)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_numeric_moments_match_solvers(seed):
    rng = np.random.default_rng(seed)
    m, pol = random_admissible(rng, cyclic=False, allow_zero_r=True)
    first = solve_first_order(m, pol.r)
    second = solve_second_order(m, pol.r, first)
    i = int(rng.integers(m.I))
    k = int(rng.integers(m.K))
    assert pgf_moment_numeric(m, pol.r, i, k, 1) == pytest.approx(first.q[i, k], rel=1e-5, abs=1e-9)
    assert pgf_moment_numeric(m, pol.r, i, k, 2) == pytest.approx(second.F[i, k, k], rel=1e-4, abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(0, 1), min_size=5, max_size=5))
def test_pgf_in_unit_interval(seed, zs):
    rng = np.random.default_rng(seed)
    m, pol = random_admissible(rng, cyclic=False)
    z = zs[: m.K] + [1.0] * max(0, m.K - len(zs))
    v = evaluate_pgf(m, pol.r, int(rng.integers(m.I)), z)
    assert 0 < v <= 1
