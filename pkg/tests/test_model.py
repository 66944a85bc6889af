import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from polling_moments.model import (
    BEP,
    BGP,
    BSP,
    DistributionSpec,
    PollingTable,
    SystemModel,
    ValidationError,
    distribution_lst,
    distribution_moment,
    require_valid,
    validate,
)

D = DistributionSpec


def specs():
    pos = st.floats(0.05, 20, allow_nan=False)
    return st.one_of(
        pos.map(D.deterministic),
        pos.map(D.exponential),
        st.tuples(st.integers(1, 6), pos).map(lambda t: D.erlang(*t)),
        st.tuples(st.floats(0, 5), st.floats(0.01, 5)).map(lambda t: D.uniform(t[0], t[0] + t[1])),
    )


def test_moment_examples():
    assert distribution_moment(D.deterministic(2), 2) == 4
    assert distribution_moment(D.exponential(8), 1) == 0.125
    assert distribution_moment(D.exponential(8), 2) == pytest.approx(0.03125, rel=1e-15)


def test_exponential_second_moment_matches_density_integral():
    val, _ = integrate.quad(lambda x: x * x * 8 * math.exp(-8 * x), 0, math.inf)
    assert distribution_moment(D.exponential(8), 2) == pytest.approx(val, rel=1e-10)


@pytest.mark.parametrize("spec,density,upper", [
    (D.erlang(3, 2.0), lambda x: 2.0**3 * x**2 * math.exp(-2 * x) / 2, math.inf),
    (D.uniform(1.0, 3.0), lambda x: 0.5, 3.0),
])
def test_moments_match_density_integrals(spec, density, upper):
    lo = 1.0 if spec.family == "uniform" else 0.0
    for order in (1, 2):
        val, _ = integrate.quad(lambda x: x**order * density(x), lo, upper)
        assert spec.moment(order) == pytest.approx(val, rel=1e-10)
    u = 0.7
    val, _ = integrate.quad(lambda x: math.exp(-u * x) * density(x), lo, upper)
    assert spec.lst(u) == pytest.approx(val, rel=1e-10)


def test_unsupported_order():
    with pytest.raises(ValueError):
        distribution_moment(D.exponential(1), 3)


def test_lst_examples():
    assert distribution_lst(D.deterministic(1), 0.5) == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert distribution_lst(D.exponential(4), 4) == 0.5
    for s in (D.deterministic(1), D.exponential(2), D.erlang(2, 3), D.uniform(0, 2)):
        assert distribution_lst(s, 0) == 1.0


def test_negative_lst_argument_rejected():
    with pytest.raises(ValueError):
        D.exponential(1).lst(-0.1)


def test_uniform_lst_complement_small_argument_is_accurate():
    s = D.uniform(1, 3)
    u = 1e-9
    assert s.lst_complement(u) == pytest.approx(u * s.mean(), rel=1e-8)


@given(specs(), st.floats(0, 20))
def test_lst_and_complement_agree(spec, u):
    assert spec.lst(u) + spec.lst_complement(u) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("bad", [
    ("exponential", (0,)), ("deterministic", (-1,)), ("erlang", (1.5, 1)),
    ("uniform", (2, 1)), ("uniform", (-1, 1)), ("weibull", (1,)),
])
def test_invalid_specs(bad):
    with pytest.raises(ValueError):
        D(*bad)


@given(specs())
def test_jensen(spec):
    assert spec.second_moment() >= spec.mean() ** 2 * (1 - 1e-12)


@given(specs(), st.lists(st.floats(0, 20), min_size=3, max_size=12))
def test_lst_range_monotone_log_convex(spec, grid):
    grid = sorted(set(grid))
    vals = [spec.lst(u) for u in grid]
    assert all(0 < v <= 1 for v in vals)
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    # log-convexity on a uniform grid: midpoint inequality
    for u in grid:
        h = 0.25
        lo, mid, hi = spec.lst(u), spec.lst(u + h), spec.lst(u + 2 * h)
        if lo > 1e-200 and hi > 1e-200:
            assert 2 * math.log(mid) <= math.log(lo) + math.log(hi) + 1e-12 * (1 + abs(math.log(lo)))


@pytest.mark.parametrize("spec", [D.deterministic(1.5), D.exponential(8), D.erlang(3, 2), D.uniform(0.5, 2)])
def test_sampler_mean_within_five_se(spec):
    rng = np.random.default_rng(7)
    x = spec.sample(rng, 100_000)
    assert np.all(x >= 0)
    se = math.sqrt(max(spec.second_moment() - spec.mean() ** 2, 0) / x.size)
    assert abs(x.mean() - spec.mean()) <= 5 * se + 1e-12


@pytest.mark.parametrize("spec", [D.deterministic(1.5), D.exponential(8), D.erlang(3, 2), D.uniform(0.5, 2)])
def test_sample_sum_law(spec):
    rng = np.random.default_rng(3)
    sums = np.array([spec.sample_sum(rng, 5) for _ in range(20_000)])
    var = 5 * (spec.second_moment() - spec.mean() ** 2)
    assert abs(sums.mean() - 5 * spec.mean()) <= 5 * math.sqrt(var / sums.size) + 1e-12
    assert spec.sample_sum(rng, 0) == 0.0


@pytest.mark.parametrize("spec", [D.deterministic(1.5), D.exponential(8), D.erlang(3, 2), D.uniform(0.5, 2)])
def test_scaling_preserves_family_and_scales_mean(spec):
    s = spec.scaled(10)
    assert s.family == spec.family
    assert s.mean() == pytest.approx(10 * spec.mean(), rel=1e-14)


def test_table_lookback_is_cyclic():
    t = PollingTable.from_one_based([1, 2, 3, 2, 3])
    assert t.num_stages == 5 and t.num_queues == 3
    # one-based w(i, j) = i - (j mod I) if (j mod I) < i else I - (j mod I - i)
    for i1 in range(1, 6):
        for j in range(1, 12):
            jm = j % 5
            w1 = i1 - jm if jm < i1 else 5 - (jm - i1)
            assert t.lookback(i1 - 1, j) == w1 - 1
    assert t.visits(1) == [1, 3]
    assert t.to_one_based() == [1, 2, 3, 2, 3]


def test_table_requires_every_queue():
    with pytest.raises(ValueError, match="never visited"):
        PollingTable.from_one_based([1, 1, 3], 3)


def _model(lam=1.0):
    return SystemModel((lam,), (D.exponential(4),), (D.deterministic(1),), PollingTable.cyclic(1))


def test_validate_examples():
    assert validate(_model(), BEP((1,))) == []
    report = validate(_model(5.0), BEP((1,)))
    assert [v.code for v in report] == ["stability"]
    two = SystemModel((1, 1), (D.exponential(4),) * 2, (D.deterministic(1),) * 2, PollingTable.cyclic(2))
    report = validate(two, BEP((0, 0.5)))
    assert [v.code for v in report] == ["unserved"]
    assert "queue 1" in report[0].message


def test_validate_other_violations():
    m = SystemModel((1,), (D.exponential(4),), (D.deterministic(0),), PollingTable.cyclic(1))
    assert [v.code for v in validate(m, BEP((1,)))] == ["switchover"]
    assert [v.code for v in validate(_model(), BEP((1.5,)))] == ["policy"]
    assert [v.code for v in validate(_model(), BGP((0.5, 0.5)))] == ["policy"]
    assert [v.code for v in validate(_model(), BSP((-1,)))] == ["policy"]
    assert [v.code for v in validate(_model(0.0), BEP((1,)))] == ["arrival"]


def test_zero_switchover_allowed_when_total_positive():
    m = SystemModel((1, 1), (D.exponential(4),) * 2, (D.deterministic(0), D.deterministic(1)),
                    PollingTable.cyclic(2))
    assert validate(m, BEP((1, 1))) == []


def test_validate_is_pure():
    m = _model(5.0)
    assert validate(m, BEP((0,))) == validate(m, BEP((0,)))


def test_require_valid_raises():
    with pytest.raises(ValidationError):
        require_valid(_model(5.0), BEP((1,)))


def test_bsp_levels_scale_and_must_be_integers():
    assert BSP((0, 6, 0, 0, 4)).scaled(10).y == (0, 60, 0, 0, 40)
    with pytest.raises(ValueError):
        BSP((1.5,))


def test_model_quantities(three_queue):
    m = three_queue
    assert m.rho == pytest.approx(0.75)
    assert m.s_total == 10
    np.testing.assert_allclose(m.mu, 8)
    assert m.scaled(10).s_total == pytest.approx(100)
