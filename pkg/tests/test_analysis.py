"""Tests for orbits, fixed points, period detection, Lyapunov estimation,
collapse detection and elasticity."""

import math
import random

import numpy as np
import pytest

from marketdyn.analysis import (
    FixedPointNotFound,
    OrbitDomainError,
    OrbitEscapeError,
    PERFECTLY_ELASTIC,
    classify_samples,
    demand_map_1d,
    demand_map_derivative_1d,
    detect_collapse,
    detect_period,
    find_fixed_point,
    find_fixed_points,
    finite_difference_derivative,
    generate_orbit,
    label_with_lyapunov,
    lyapunov_exponent,
    ped,
    supply_map_1d,
    supply_map_derivative_1d,
)
from marketdyn.model import (
    CostPricing,
    DomainError,
    MapForm,
    MarketParams,
    MarketState,
    NAIVE,
    SupplierBehavior,
)

NAIVE_MARKET = MarketParams(a=10.0, b=0.09)
NAIVE_COST = CostPricing(fc=10.0, v=4.0, margin=0.5)
CO_MARKET = MarketParams(a=30.0, b=0.125)
CO_COST = CostPricing(fc=30.0, v=6.0, margin=0.5)
M2 = SupplierBehavior(m=2.0)
SEED = MarketState(1.0, 1.0, 0.0)

# bisection result for the naive map at b = 0.03, frozen as a regression value
EQUILIBRIUM_B003 = 7.861941490703618


def test_orbit_zero_steps():
    orbit = generate_orbit(SEED, NAIVE_MARKET, NAIVE_COST, NAIVE, steps=0)
    assert orbit.states == (SEED,)


def test_orbit_naive_series_shape():
    # 20 chaotic periods: large swings overall, near-flat window mid-series
    orbit = generate_orbit(SEED, NAIVE_MARKET, NAIVE_COST, NAIVE, steps=20)
    d = orbit.demands
    assert len(d) == 21
    window = [abs(d[n + 1] - d[n]) for n in range(6, 10)]
    overall = [abs(d[n + 1] - d[n]) for n in range(20)]
    assert max(window) < 1.5
    assert max(overall) > 5.0


def test_orbit_unbounded_raises_with_step():
    market = MarketParams(a=10.0, b=0.095)
    cost = CostPricing(fc=20.0, v=2.0, margin=0.5)
    with pytest.raises(OrbitDomainError) as err:
        generate_orbit(SEED, market, cost, NAIVE, steps=200)
    assert 50 <= err.value.step <= 90


def test_orbit_bounded_truncates_after_collapse():
    market = MarketParams(a=10.0, b=0.095)
    cost = CostPricing(fc=20.0, v=2.0, margin=0.5)
    orbit = generate_orbit(SEED, market, cost, NAIVE, steps=200, bounded=True)
    assert orbit.states[-1].collapsed
    assert not any(s.collapsed for s in orbit.states[:-1])
    assert len(orbit.states) < 201


def test_detect_collapse_report():
    market = MarketParams(a=10.0, b=0.095)
    cost = CostPricing(fc=20.0, v=2.0, margin=0.5)
    orbit = generate_orbit(SEED, market, cost, NAIVE, steps=200, bounded=True)
    report = detect_collapse(orbit)
    assert report is not None
    assert report.step == len(orbit.states) - 1
    assert report.trigger == "negative demand clamp"
    # stable market never collapses
    calm = generate_orbit(
        SEED, MarketParams(10.0, 0.03), NAIVE_COST, NAIVE, steps=3000, bounded=True
    )
    assert detect_collapse(calm) is None


def test_collapse_consistency_bounded_vs_unbounded():
    # bounded collapse and unbounded domain failure agree to within a step,
    # across surviving and dying parameter sets
    from marketdyn.analysis import OrbitDomainError

    cost = CostPricing(20.0, 2.0, 0.5)
    for b in (0.03, 0.07, 0.09, 0.095, 0.11):
        market = MarketParams(10.0, b)
        bounded = generate_orbit(SEED, market, cost, NAIVE, 2000, bounded=True)
        report = detect_collapse(bounded)
        try:
            generate_orbit(SEED, market, cost, NAIVE, 2000, bounded=False)
            failed_at = None
        except OrbitDomainError as err:
            failed_at = err.step
        if report is None:
            assert failed_at is None, f"b={b}: unbounded died, bounded did not"
        else:
            assert failed_at is not None, f"b={b}: bounded died, unbounded did not"
            assert failed_at <= report.step + 1


def test_find_fixed_point_constant_map():
    flat = MarketParams(a=10.0, b=0.0)
    f = demand_map_1d(flat, NAIVE_COST)
    assert find_fixed_point(f, 0.5, 20.0) == pytest.approx(10.0, abs=1e-12)


def test_find_fixed_point_equilibrium_value():
    f = demand_map_1d(MarketParams(10.0, 0.03), NAIVE_COST)
    x = find_fixed_point(f, 0.1, 10.0)
    assert x == pytest.approx(EQUILIBRIUM_B003, abs=1e-11)
    assert abs(f(x) - x) < 1e-12


def test_find_fixed_point_requires_sign_change():
    f = demand_map_1d(MarketParams(10.0, 0.03), NAIVE_COST)
    with pytest.raises(FixedPointNotFound):
        find_fixed_point(f, 8.5, 9.0)


def test_unstable_fixed_point_at_chaotic_b():
    f = demand_map_1d(NAIVE_MARKET, NAIVE_COST)
    df = demand_map_derivative_1d(NAIVE_MARKET, NAIVE_COST)
    points = find_fixed_points(f, 1e-3, 10.0)
    assert len(points) == 1
    assert abs(df(points[0])) > 1.0
    # iteration from D=1 does not settle onto it
    orbit = generate_orbit(SEED, NAIVE_MARKET, NAIVE_COST, NAIVE, steps=3000)
    assert abs(orbit.demands[-1] - points[0]) > 1e-3


def test_stable_fixed_point_attracts_orbit():
    f = demand_map_1d(MarketParams(10.0, 0.03), NAIVE_COST)
    df = demand_map_derivative_1d(MarketParams(10.0, 0.03), NAIVE_COST)
    x = find_fixed_point(f, 0.1, 10.0)
    assert abs(df(x)) < 1.0
    orbit = generate_orbit(
        SEED, MarketParams(10.0, 0.03), NAIVE_COST, NAIVE, steps=3000
    )
    assert abs(orbit.demands[-1] - x) < 1e-6


def test_detect_period_basics():
    assert detect_period([5.0] * 200) == 1
    two = [1.0, 3.0] * 100
    assert detect_period(two) == 2
    three = [1.0, 2.0, 7.0] * 70
    assert detect_period(three) == 3
    rng = random.Random(2)
    noise = [rng.uniform(0.0, 1.0) for _ in range(200)]
    assert detect_period(noise) is None
    with pytest.raises(ValueError):
        detect_period([1.0, 2.0, 3.0])


def test_detect_period_relative_tolerance():
    # jitter below the scaled tolerance still counts as periodic
    base = [100.0, 200.0] * 100
    jittered = [x + 1e-5 * (i % 3) for i, x in enumerate(base)]
    assert detect_period(jittered, tolerance=1e-6) == 2


def test_classify_labels():
    assert classify_samples([4.2] * 200) == "fixed-point"
    assert classify_samples([1.0, 2.0] * 100) == "periodic(2)"
    assert label_with_lyapunov("aperiodic", 0.3) == "chaotic"
    assert label_with_lyapunov("aperiodic", -0.2) == "unresolved"
    assert label_with_lyapunov("periodic(2)", -0.2) == "periodic(2)"


def test_named_cycles_at_published_parameters():
    orbit = generate_orbit(
        SEED, MarketParams(30.0, 0.1308), CO_COST, M2, steps=3000, bounded=True
    )
    assert detect_period(orbit.demands[2501:]) == 3
    orbit = generate_orbit(
        SEED, MarketParams(10.0, 0.08531), NAIVE_COST, NAIVE, steps=3000, bounded=True
    )
    assert detect_period(orbit.demands[2501:]) == 6


def test_demand_price_orbit_conjugacy():
    # the demand and price recurrences track each other through D = a - b*P
    # (at contracting parameters, where roundoff cannot amplify)
    from marketdyn.model import step_naive_demand_1d, step_naive_price_1d, demand

    for b in (0.03, 0.05):
        market = MarketParams(10.0, b)
        d, p = 1.0, (10.0 - 1.0) / b  # same starting point in both charts
        for _ in range(500):
            d = step_naive_demand_1d(d, market, NAIVE_COST)
            p = step_naive_price_1d(p, market, NAIVE_COST)
            assert abs(demand(p, market) - d) < 1e-9


def test_lyapunov_linear_map_exact():
    lam = lyapunov_exponent(lambda x: 0.5 * x, lambda x: 0.5, 1.0)
    assert abs(lam - math.log(0.5)) < 1e-12


def test_lyapunov_logistic_oracle():
    lam = lyapunov_exponent(
        lambda x: 4.0 * x * (1.0 - x),
        lambda x: 4.0 - 8.0 * x,
        0.3,
    )
    assert abs(lam - math.log(2.0)) < 1e-2


def test_lyapunov_positive_in_chaotic_band():
    f = demand_map_1d(NAIVE_MARKET, NAIVE_COST)
    df = demand_map_derivative_1d(NAIVE_MARKET, NAIVE_COST)
    lam = lyapunov_exponent(f, df, 1.0)
    assert lam > 0.01


def test_lyapunov_escape_carries_step():
    f = demand_map_1d(MarketParams(10.0, 0.2), NAIVE_COST)  # dies immediately
    with pytest.raises(OrbitEscapeError) as err:
        lyapunov_exponent(f, None, 1.0)
    assert err.value.step >= 1


def test_finite_difference_matches_analytic():
    f = demand_map_1d(NAIVE_MARKET, NAIVE_COST)
    df = demand_map_derivative_1d(NAIVE_MARKET, NAIVE_COST)
    fd = finite_difference_derivative(f)
    rng = random.Random(13)
    for _ in range(100):
        d = rng.uniform(0.5, 10.0)
        assert abs(df(d) - fd(d)) < 1e-5 * max(1.0, abs(df(d)))


def test_supply_map_derivative_analytic():
    f = supply_map_1d(CO_MARKET, CO_COST, M2)
    df = supply_map_derivative_1d(CO_MARKET, CO_COST, M2)
    fd = finite_difference_derivative(f)
    rng = random.Random(19)
    checked = 0
    for _ in range(300):
        s = rng.uniform(1.0, 20.0)
        try:
            exact = df(s)
        except DomainError:
            continue
        assert abs(exact - fd(s)) < 1e-5 * max(1.0, abs(exact))
        checked += 1
    assert checked > 100


def test_estimator_methods_agree():
    # analytic vs finite-difference Lyapunov on the naive map
    f = demand_map_1d(NAIVE_MARKET, NAIVE_COST)
    df = demand_map_derivative_1d(NAIVE_MARKET, NAIVE_COST)
    analytic = lyapunov_exponent(f, df, 1.0, transient=500, samples=4000)
    numeric = lyapunov_exponent(f, None, 1.0, transient=500, samples=4000)
    assert abs(analytic - numeric) < 1e-4


def test_ped_hand_value():
    value = ped(10.0, 11.0, NAIVE_MARKET)
    assert value == pytest.approx(-0.098901, abs=1e-6)


def test_ped_perfectly_elastic_marker():
    assert ped(5.0, 6.0, MarketParams(a=10.0, b=0.0)) is PERFECTLY_ELASTIC


def test_ped_errors():
    with pytest.raises(DomainError):
        ped(5.0, 5.0, NAIVE_MARKET)
    with pytest.raises(DomainError):
        ped(0.0, 5.0, NAIVE_MARKET)
    at_zero = 10.0 / 0.09  # demand(p1) == 0
    with pytest.raises(DomainError):
        ped(at_zero, 5.0, MarketParams(a=10.0, b=0.09))
