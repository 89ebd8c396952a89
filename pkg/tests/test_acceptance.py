"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the report lines.
"""

import math
import time

import numpy as np

from avgmdp import (
    AllOnTail,
    ConstantTail,
    MetricParams,
    Policy,
    approaching_reward_chain,
    average_cost,
    ctmdp_from_queue,
    diminishing_cost_chain,
    distance,
    eta_diff_bound,
    exhaustive_search,
    extensionally_equal,
    history_block_averages,
    history_stream_average,
    modulus_scan,
    prefix_agreement,
    scaled_model,
    simulate_eta,
    solve_nu,
    stationary_supremum_gap,
    steady_state,
    verify_cmu,
)
from avgmdp.sim import SimConfig
from instances import always_on, birth_death_corpus, mm1, signed_mm1, two_group


def _report(number: int, name: str, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] criterion {number}: {name} -- {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


# -----------------------------------------------------------------------------
def test_criterion_1_metric_law_suite():
    chain = approaching_reward_chain()
    params = MetricParams(r=0.1)
    rng = np.random.default_rng(2024)

    def random_policy():
        length = int(rng.integers(0, 13))
        bits = tuple(int(b) for b in rng.integers(0, 2, size=length))
        return Policy(prefix=bits, tail=ConstantTail(int(rng.integers(0, 2)))
                      ).bind(chain)

    def mutate_beyond(u, cut):
        horizon = max(len(u.prefix), cut + 1) + int(rng.integers(0, 4))
        actions = [u.action(p) for p in range(horizon)]
        for pos in range(cut + 1, horizon):
            if rng.random() < 0.5:
                actions[pos] = 1 - actions[pos]
        return Policy(prefix=tuple(actions),
                      tail=ConstantTail(int(rng.integers(0, 2)))).bind(chain)

    started = time.perf_counter()
    checked = 0
    ok = True
    why = ""
    for trial in range(10_000):
        u1 = random_policy()
        u2 = mutate_beyond(u1, int(rng.integers(0, 10))) if trial % 2 else random_policy()
        u3 = random_policy()
        d11 = distance(u1, u1, params)
        d12 = distance(u1, u2, params)
        d21 = distance(u2, u1, params)
        d13 = distance(u1, u3, params)
        d23 = distance(u2, u3, params)
        agreement = prefix_agreement(u1, u2)
        if d11 != 0.0:
            ok, why = False, f"d(u,u) = {d11}"
            break
        if d12 != d21:
            ok, why = False, f"asymmetry {d12} vs {d21}"
            break
        if (d12 == 0.0) != extensionally_equal(u1, u2):
            ok, why = False, "positivity violated"
            break
        if d13 > d12 + d23 + 1e-12:
            ok, why = False, f"triangle violated by {d13 - d12 - d23}"
            break
        for k in range(0, 13):
            if (d12 < 0.1 ** k) != (agreement >= k):
                ok, why = False, f"Lemma-1 iff fails at k={k}"
                break
        if not ok:
            break
        checked += 1
    elapsed = time.perf_counter() - started
    ok = ok and elapsed < 5.0
    _report(1, "metric law suite", ok,
            why or f"{checked} triples, axioms + Lemma-1 iff, {elapsed:.2f}s < 5s")


# -----------------------------------------------------------------------------
def test_criterion_2_mm1_closed_form():
    started = time.perf_counter()
    model = mm1(0.5)
    eta = average_cost(model, always_on(model), 1e-10)
    rho = 0.5
    oracle = rho / (1.0 - rho)          # geometric-series mean, independent
    elapsed = time.perf_counter() - started
    ok = abs(eta.value - oracle) <= 1e-8 and elapsed < 1.0
    _report(2, "M/M/1 closed form", ok,
            f"eta = {eta.value:.12f} vs {oracle} (|diff| = "
            f"{abs(eta.value - oracle):.2e} <= 1e-8), {elapsed:.2f}s < 1s")


# -----------------------------------------------------------------------------
def test_criterion_3_truncation_solver_equivalence():
    corpus = birth_death_corpus()
    assert len(corpus) >= 10
    worst_pi = 0.0
    worst_eta = 0.0
    worst_scale = 0.0
    for model, policy in corpus:
        generic = ctmdp_from_queue(model)
        sol = solve_nu(generic, policy, 1e-10)
        ss = steady_state(model, policy, 1e-12)
        eta_q = average_cost(model, policy, 1e-10).value
        n = min(len(ss.pi), len(sol.pi))
        worst_pi = max(worst_pi, float(np.max(np.abs(ss.pi[:n] - sol.pi[:n]))))
        worst_eta = max(worst_eta, abs(eta_q - sol.eta))
        sol10 = solve_nu(scaled_model(generic, 10.0), policy, 1e-10)
        m = min(len(sol.pi), len(sol10.pi))
        worst_scale = max(worst_scale,
                          float(np.max(np.abs(sol.pi[:m] - sol10.pi[:m]))),
                          abs(sol.eta - sol10.eta))
    ok = worst_pi <= 1e-8 and worst_eta <= 1e-8 and worst_scale <= 1e-10
    _report(3, "truncation-solver equivalence", ok,
            f"{len(corpus)} instances: max per-state {worst_pi:.2e} <= 1e-8, "
            f"max eta diff {worst_eta:.2e} <= 1e-8, "
            f"scale-invariance {worst_scale:.2e} <= 1e-10")


# -----------------------------------------------------------------------------
def test_criterion_4_continuity_bound_soundness():
    model = two_group(1.5)
    rng = np.random.default_rng(99)
    busy = model.action_set(1)
    idle = model.action_set(0)
    pairs = 0
    ok = True
    why = ""
    for _ in range(100):
        length = int(rng.integers(1, 9))
        base = [idle[rng.integers(len(idle))]] + \
               [busy[rng.integers(len(busy))] for _ in range(length - 1)]
        variant = list(base)
        cut = int(rng.integers(0, length))
        for pos in range(cut + 1, length + int(rng.integers(0, 3))):
            src = busy if pos >= 1 else idle
            if pos >= len(variant):
                variant.append(src[rng.integers(len(src))])
            elif rng.random() < 0.7:
                variant[pos] = src[rng.integers(len(src))]
        u = Policy(prefix=tuple(base), tail=AllOnTail()).bind(model)
        u2 = Policy(prefix=tuple(variant), tail=AllOnTail()).bind(model)
        report = eta_diff_bound(model, u, u2)
        if report.sandwich_strict is False:
            ok, why = False, "sandwich not strict"
            break
        if abs(report.eta_diff) > report.rigorous_bound:
            ok, why = False, (f"|diff| {abs(report.eta_diff):.3e} > bound "
                              f"{report.rigorous_bound:.3e}")
            break
        pairs += 1
    rows = modulus_scan(model, always_on(model), [2, 5, 10], tol=1e-10, seed=4)
    bounds = [r.max_bound for r in rows]
    diffs = [r.max_abs_diff for r in rows]
    monotone = all(a >= b for a, b in zip(bounds, bounds[1:])) and \
        all(a >= b for a, b in zip(diffs, diffs[1:]))
    ok = ok and monotone
    _report(4, "continuity bound soundness", ok,
            why or f"{pairs} pairs sandwiched and bounded; modulus columns "
                   f"nonincreasing over k=2,5,10")


# -----------------------------------------------------------------------------
def test_criterion_5_cost_chain_reproduction():
    chain = diminishing_cost_chain()
    result = exhaustive_search(chain, 8, ConstantTail(1), mode="min")
    all_one = Policy(prefix=(), tail=ConstantTail(1)).bind(chain)
    ok = (result.best_eta.value == 0.0
          and extensionally_equal(result.best_policy, all_one))
    _report(5, "always-advance optimum with zero cost", ok,
            f"best = {result.best_policy.literal()} with eta = "
            f"{result.best_eta.value} (exact zero), "
            f"{result.evaluated} candidates")


# -----------------------------------------------------------------------------
def test_criterion_6_reward_chain_reproduction():
    chain = approaching_reward_chain()
    ok = True
    why = ""
    for budget in range(1, 65):
        report = stationary_supremum_gap(chain, budget)
        expected = 1.0 - 1.0 / budget
        if not (math.isclose(report.best_eta, expected, rel_tol=1e-12)
                and report.best_eta < 1.0 and report.gap > 0.0):
            ok, why = False, f"gap report wrong at budget {budget}"
            break
    average = history_stream_average(100_000)
    if ok and average <= 0.95:
        ok, why = False, f"stream average {average} <= 0.95"
    blocks = history_block_averages(100_000)
    if ok and not all(a <= b for a, b in zip(blocks, blocks[1:])):
        ok, why = False, "block averages not nondecreasing"
    center = Policy(prefix=(), tail=ConstantTail(1)).bind(chain)
    rows = modulus_scan(chain, center, [2, 5, 10])
    if ok:
        for row in rows:
            if row.max_abs_diff < 1.0 - 1.0 / row.k:
                ok, why = False, f"modulus at k={row.k} below 1 - 1/k"
                break
    _report(6, "unattainable stationary supremum", ok,
            why or f"gaps 1/L for L <= 64; stream average {average:.4f} > 0.95 "
                   f"with nondecreasing blocks; modulus >= 1 - 1/k")


# -----------------------------------------------------------------------------
def test_criterion_7_priority_rule_conformance():
    started = time.perf_counter()
    model = two_group(1.0)              # mu = (2, 1), c = (1, 1), h(n) = n
    result = exhaustive_search(model, 6, AllOnTail(), tol=1e-9)
    check = verify_cmu(model, result.best_policy)
    elapsed = time.perf_counter() - started
    ok = check.ok and elapsed < 60.0
    _report(7, "cost-to-rate priority of the optimum", ok,
            f"best = {result.best_policy.literal()}, eta = "
            f"{result.best_eta.value:.9f}, conforms = {check.ok}, "
            f"{elapsed:.1f}s < 60s")


# -----------------------------------------------------------------------------
def test_criterion_8_sign_alternating_cost():
    model = signed_mm1()
    eta = average_cost(model, always_on(model), 1e-10)
    # Signed-series oracle: sum (-1)^n n (1-rho) rho^n = -(rho - rho^2)/(1+rho)^2.
    rho = 0.5
    closed = -(rho - rho * rho) / (1.0 + rho) ** 2
    brute = sum((n if n % 2 == 0 else -n) * (1 - rho) * rho ** n
                for n in range(4000))
    ok = (abs(eta.value - closed) <= 1e-8
          and abs(closed - (-1.0 / 9.0)) < 1e-15
          and abs(eta.value - brute) <= 1e-8)
    _report(8, "cost unbounded on both sides", ok,
            f"eta = {eta.value:.12f} vs -1/9 "
            f"(|diff| = {abs(eta.value + 1.0 / 9.0):.2e} <= 1e-8)")


# -----------------------------------------------------------------------------
def test_criterion_9_simulation_cross_check():
    instances = [mm1(0.5), mm1(0.8), two_group(1.0)]
    total = 0
    inside = 0
    slowest = 0.0
    for model in instances:
        policy = always_on(model)
        analytic = average_cost(model, policy, 1e-10).value
        for seed in range(20):
            cfg = SimConfig(horizon=20_000.0, warmup=2_000.0, seed=seed,
                            batches=20)
            started = time.perf_counter()
            estimate = simulate_eta(model, policy, cfg)
            slowest = max(slowest, time.perf_counter() - started)
            half = (estimate.ci_hi - estimate.ci_lo) / 2.0
            total += 1
            if abs(estimate.eta_hat - analytic) <= 3.0 * half:
                inside += 1
    rate = inside / total
    ok = rate >= 0.95 and slowest < 10.0
    _report(9, "simulation cross-check", ok,
            f"{inside}/{total} runs inside the 3x-widened 95% CI "
            f"({rate:.0%} >= 95%), slowest run {slowest:.2f}s < 10s")
