"""Simulation oracle: determinism, exact degenerate cases, CI behavior."""

import warnings

import pytest

from avgmdp import (
    ConstantTail,
    Policy,
    PolynomialHolding,
    SimConfig,
    average_cost,
    simulate_eta,
    steady_state,
)
from instances import always_on, mm1, two_group


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(horizon=10.0, warmup=10.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=10.0, warmup=-1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(horizon=10.0, warmup=1.0, seed=0, batches=1)


def test_no_arrivals_is_exact():
    model = mm1(0.0, cost=2.0, holding=PolynomialHolding((3.0,)))
    u = Policy(prefix=((0,),), tail=ConstantTail((1,))).bind(model)
    estimate = simulate_eta(model, u, SimConfig(horizon=50.0, warmup=1.0, seed=9))
    assert estimate.eta_hat == pytest.approx(3.0, rel=1e-12)
    assert estimate.ci_lo == pytest.approx(estimate.ci_hi)


def test_same_seed_bit_identical():
    model = mm1(0.5)
    u = always_on(model)
    cfg = SimConfig(horizon=5_000.0, warmup=500.0, seed=1234)
    first = simulate_eta(model, u, cfg)
    second = simulate_eta(model, u, cfg)
    assert first.eta_hat == second.eta_hat
    assert first.batch_means == second.batch_means
    assert first.events == second.events


def test_different_seeds_differ():
    model = mm1(0.5)
    u = always_on(model)
    a = simulate_eta(model, u, SimConfig(horizon=5_000.0, warmup=500.0, seed=1))
    b = simulate_eta(model, u, SimConfig(horizon=5_000.0, warmup=500.0, seed=2))
    assert a.eta_hat != b.eta_hat


def test_mm1_estimate_brackets_analytic_value():
    model = mm1(0.5)
    u = always_on(model)
    estimate = simulate_eta(model, u, SimConfig(horizon=100_000.0,
                                                warmup=5_000.0, seed=42))
    analytic = average_cost(model, u, 1e-10).value
    assert estimate.ci_lo <= analytic <= estimate.ci_hi
    assert estimate.eta_hat == pytest.approx(analytic, abs=0.08)


def test_empty_fraction_tracks_pi0():
    model = two_group(1.0)
    u = always_on(model)
    estimate = simulate_eta(model, u, SimConfig(horizon=60_000.0,
                                                warmup=3_000.0, seed=7))
    pi0 = steady_state(model, u, 1e-10).pi[0]
    assert estimate.p0_lo <= pi0 <= estimate.p0_hi


def test_unstable_policy_warns_but_runs():
    model = mm1(2.0)   # service cannot keep up
    u = always_on(model)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimate = simulate_eta(model, u, SimConfig(horizon=200.0,
                                                    warmup=10.0, seed=5))
    assert any("uncertified" in str(w.message) for w in caught)
    assert estimate.eta_hat > 5.0   # the queue visibly blows up
