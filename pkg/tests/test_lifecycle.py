import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import reservation_price_loops
from rxgame.distributions import DomainError
from rxgame.lifecycle import (
    LifecycleAgent,
    SinglePeriodAgent,
    _cutoff,
    decide,
    on_decision_boundary,
    random_agent,
    read_cohort,
    reduce_cohort,
    reservation_price,
    single_period_psi,
    utility_weight,
    write_cohort,
)
from rxgame.population import Choice


def flat_agent(c=1.0, q=1.0, g=1.0, alpha=0.0, eps1=0.5, eps2=0.2, p=0.5, horizon=None, n=5):
    return LifecycleAgent((c,) * n, (q,) * n, (g,) * n, alpha, eps1, eps2, (p,) * n, horizon)


# -- utility weights --------------------------------------------------------------------------

def test_weight_same_period_is_one_factor():
    a = LifecycleAgent((1, 1, 1), (0.8, 0.7, 0.6), (0.9, 0.95, 0.99), 0.3, 1, 1, (0.5,) * 3, 3)
    for s in range(3):
        assert utility_weight(a, s, s) == pytest.approx(a.quality[s] * a.survival[s], rel=1e-15)


def test_weight_pure_discounting():
    assert utility_weight(flat_agent(alpha=0.1), 0, 2) == pytest.approx(1 / 1.21, rel=1e-14)


def test_weight_product_over_three_periods():
    a = flat_agent(q=0.9, g=0.95, alpha=0.0)
    assert utility_weight(a, 0, 2) == pytest.approx(0.855**3, rel=1e-14)


@pytest.mark.parametrize("s,t", [(2, 1), (-1, 0), (0, 5)])
def test_weight_index_errors(s, t):
    with pytest.raises(DomainError):
        utility_weight(flat_agent(horizon=5), s, t)


# -- reservation price ------------------------------------------------------------------------

def test_no_efficacy_means_no_value():
    a = random_agent(np.random.default_rng(3), horizon=None)
    a = replace(a, efficacy=0.0)
    assert all(reservation_price(a, t) == 0.0 for t in range(6))


@pytest.mark.parametrize("c,eps1,eps2", [(1.0, 0.5, 0.2), (3.0, 2.0, 0.05), (0.7, 1.3, 1.0)])
def test_geometric_series_closed_form(c, eps1, eps2):
    a = flat_agent(c=c, eps1=eps1, eps2=eps2)
    assert abs(reservation_price(a, 0) - c * eps1 / eps2) <= 1e-9


def test_bound_on_random_agents():
    rng = np.random.default_rng(20260)
    for i in range(1000):
        a = random_agent(rng, horizon=None if i % 2 else 40)
        bound = a.efficacy / a.improvement * max(a.consumption)
        for t in (0, 5):
            psi = reservation_price(a, t)
            assert psi <= bound + 1e-9
            if a.horizon is not None and a.efficacy > 0:
                assert psi < bound


def test_truncation_insensitive_to_doubling():
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = random_agent(rng, horizon=None)
        k = _cutoff(a, 0)
        base = reservation_price(a, 0)
        doubled = reservation_price(a, 0, terms=2 * k)
        assert abs(doubled - base) <= 1e-9 * max(abs(doubled), 1e-300)


def test_matches_plain_loop_finite_horizon():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = random_agent(rng, horizon=25)
        for t in (0, 10, 24):
            want = reservation_price_loops(
                a.consumption, a.quality, a.survival, a.discount, a.efficacy, a.improvement, t, 24
            )
            assert reservation_price(a, t, terms=25) == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_finite_horizon_allows_no_improvement():
    a = flat_agent(eps2=0.0, horizon=4, n=4)
    assert reservation_price(a, 0) == pytest.approx(3 * a.efficacy, rel=1e-14)


def test_infinite_horizon_without_improvement_raises():
    with pytest.raises(DomainError):
        reservation_price(flat_agent(eps2=0.0), 0)


def test_period_beyond_horizon_raises():
    with pytest.raises(DomainError):
        reservation_price(flat_agent(horizon=5), 5)


@pytest.mark.parametrize(
    "kwargs",
    [dict(quality=(1.2,)), dict(survival=(0.0,)), dict(diag_prob=(1.5,)), dict(discount=-0.1),
     dict(efficacy=-1.0), dict(improvement=-0.5), dict(consumption=())],
)
def test_invalid_agents(kwargs):
    fields = dict(consumption=(1.0,), quality=(0.9,), survival=(0.9,), discount=0.1, efficacy=1.0,
                  improvement=0.1, diag_prob=(0.5,), horizon=None)
    fields.update(kwargs)
    with pytest.raises(DomainError):
        LifecycleAgent(**fields)


def test_short_arrays_rejected():
    with pytest.raises(DomainError):
        LifecycleAgent((1,) * 3, (1,) * 3, (1,) * 3, 0, 1, 1, (0.5,) * 3, horizon=4)


seeds = st.integers(0, 2**32 - 1)
factors = st.floats(1.01, 3.0)


@given(seeds, factors)
def test_nondecreasing_in_efficacy(seed, k):
    a = random_agent(np.random.default_rng(seed), horizon=30)
    assert reservation_price(replace(a, efficacy=a.efficacy * k), 3) >= reservation_price(a, 3)


@given(seeds, factors)
def test_nonincreasing_in_improvement(seed, k):
    a = random_agent(np.random.default_rng(seed), horizon=30)
    assert reservation_price(replace(a, improvement=a.improvement * k), 3) <= reservation_price(a, 3)


@given(seeds, st.floats(0.0, 0.5))
def test_nonincreasing_in_discount(seed, extra):
    a = random_agent(np.random.default_rng(seed), horizon=None)
    assert reservation_price(replace(a, discount=a.discount + extra), 0) <= reservation_price(a, 0) * (1 + 1e-12)


# -- decisions --------------------------------------------------------------------------------

def _agent_with(psi_target, p):
    """Infinite-horizon flat agent whose reservation price is psi_target."""
    return flat_agent(c=psi_target * 0.2 / 0.5, eps1=0.5, eps2=0.2, p=p)


@pytest.mark.parametrize(
    "psi,p,premium,want",
    [(2.0, 0.5, 0.4, Choice.A), (2.0, 0.3, 0.4, Choice.T), (0.5, 0.5, 0.3, Choice.O)],
)
def test_decide_examples(psi, p, premium, want):
    a = _agent_with(psi, p)
    assert reservation_price(a, 0) == pytest.approx(psi, rel=1e-9)
    assert decide(a, 0, 1.0, premium) is want


def test_decide_weak_inequality_on_boundary():
    a = SinglePeriodAgent(wealth=4.0, diag_prob=0.5, success=0.5, loss_fraction=0.0)  # psi = 2
    assert decide(a, 0, 1.0, 0.5) is Choice.A
    assert on_decision_boundary(a, 0, 1.0, 0.5)
    assert not on_decision_boundary(a, 0, 1.0, 0.49)


@given(seeds, st.floats(0.01, 5.0), st.floats(1e-6, 2.0))
def test_premium_above_p_theta_never_insures(seed, theta, excess):
    a = random_agent(np.random.default_rng(seed), horizon=20)
    premium = a.diag_prob[2] * theta + excess
    assert decide(a, 2, theta, premium) is not Choice.A


@given(seeds)
def test_zero_premium_insures_when_price_within_valuation(seed):
    a = random_agent(np.random.default_rng(seed), horizon=20)
    psi = reservation_price(a, 1)
    assert decide(a, 1, psi * 0.5, 0.0) is Choice.A
    assert decide(a, 1, psi, 0.0) is Choice.A


# -- single period and cohorts ----------------------------------------------------------------

@pytest.mark.parametrize(
    "w,q,l,want", [(100, 0.5, 0.2, 40.0), (100, 0.5, 1.0, 0.0), (37.5, 1.0, 0.0, 37.5)]
)
def test_single_period_formula(w, q, l, want):
    assert single_period_psi(SinglePeriodAgent(w, 0.3, q, l)) == want


def test_single_period_invalid():
    with pytest.raises(DomainError):
        SinglePeriodAgent(1.0, 0.5, 1.2, 0.0)


def test_one_agent_one_atom():
    a = random_agent(np.random.default_rng(5), horizon=10)
    pm = reduce_cohort([a], 3, 0.3)
    assert pm.p.tolist() == [a.diag_prob[3]]
    assert pm.psi.tolist() == [reservation_price(a, 3)]
    assert pm.weights.tolist() == [1.0]


def test_single_period_cohort_atoms():
    agents = [SinglePeriodAgent(100, 0.2, 0.5, 0.2), SinglePeriodAgent(10, 0.7, 1.0, 0.5)]
    pm = reduce_cohort(agents, 0, 0.3)
    got = sorted(zip(pm.p.tolist(), pm.psi.tolist(), pm.weights.tolist()))
    assert got == [(0.2, 40.0, 0.5), (0.7, 5.0, 0.5)]


def test_identical_agents_merge():
    a = random_agent(np.random.default_rng(9), horizon=None)
    pm = reduce_cohort([a, a], 0, 0.3)
    assert pm.weights.size == 1
    assert pm.weights[0] == pytest.approx(1.0, abs=1e-12)


def test_empty_cohort_raises():
    with pytest.raises(DomainError):
        reduce_cohort([], 0, 0.3)


def test_cohort_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    agents = [random_agent(rng, horizon=h) for h in (3, None, 7)]
    path = tmp_path / "cohort.csv"
    write_cohort(path, agents)
    assert read_cohort(path) == agents
    single = [SinglePeriodAgent(100.0, 0.2, 0.5, 0.2), SinglePeriodAgent(1 / 3, 0.1, 1.0, 0.0)]
    write_cohort(path, single)
    assert read_cohort(path) == single


def test_cohort_csv_errors_name_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wealth,diag_prob,success,loss_fraction\n1,0.5,0.5,0.1\n1,x,0.5,0.1\n")
    with pytest.raises(DomainError, match=":3:"):
        read_cohort(path)
    path.write_text("foo,bar\n1,2\n")
    with pytest.raises(DomainError, match="header"):
        read_cohort(path)


def test_reservation_price_invariant_to_array_extension():
    a = flat_agent(c=2.0, eps2=0.3, n=2)
    b = flat_agent(c=2.0, eps2=0.3, n=50)
    assert reservation_price(a, 0) == pytest.approx(reservation_price(b, 0), rel=1e-14)
    assert math.isfinite(reservation_price(a, 40))
