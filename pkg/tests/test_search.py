"""Exhaustive search, determinism, and the cost-to-rate priority check."""

import pytest

from avgmdp import (
    AllOnTail,
    ConstantTail,
    GroupServerModel,
    Policy,
    PolicyBindingError,
    PolynomialHolding,
    SearchSpaceTooLargeError,
    ServerGroup,
    UnstablePolicyError,
    cmu_policy,
    cmu_priority,
    diminishing_cost_chain,
    evaluate_eta,
    exhaustive_search,
    verify_cmu,
)
from instances import two_group


def test_length_zero_returns_tail_policy():
    model = two_group(1.0)
    result = exhaustive_search(model, 0, AllOnTail())
    assert result.evaluated == 1
    assert result.best_policy.prefix == ()


def test_cap_exceeded():
    chain = diminishing_cost_chain()
    with pytest.raises(SearchSpaceTooLargeError):
        exhaustive_search(chain, 10, ConstantTail(1), cap=100)


def test_all_candidates_unstable():
    model = two_group(2.5)
    # Tail keeps only the slower group's rate-2 server on: 2 <= 2.5.
    with pytest.raises(UnstablePolicyError, match="unstable"):
        exhaustive_search(model, 1, ConstantTail((1, 0)))


def test_search_is_deterministic():
    model = two_group(1.0)
    a = exhaustive_search(model, 4, AllOnTail(), tol=1e-8)
    b = exhaustive_search(model, 4, AllOnTail(), tol=1e-8)
    assert a.best_policy == b.best_policy
    assert a.best_eta == b.best_eta
    assert [r.eta for r in a.records] == [r.eta for r in b.records]


def test_best_dominates_every_record_within_bounds():
    model = two_group(1.0)
    result = exhaustive_search(model, 4, AllOnTail(), tol=1e-9)
    for record in result.records:
        if record.eta is not None:
            assert result.best_eta.value <= record.eta.value \
                + record.eta.bound + result.best_eta.bound


def test_top_candidates_confirmed_at_tighter_tolerance():
    model = two_group(1.0)
    result = exhaustive_search(model, 4, AllOnTail(), tol=1e-8)
    scored = sorted((r for r in result.records if r.eta is not None),
                    key=lambda r: r.eta.value)[:3]
    refined = [evaluate_eta(model, r.policy, 1e-9).value for r in scored]
    assert refined == sorted(refined)
    assert refined[0] == pytest.approx(result.best_eta.value, abs=2e-8)


def test_two_group_optimum_activates_fast_group_first():
    model = two_group(1.0)
    result = exhaustive_search(model, 6, AllOnTail(), tol=1e-8)
    assert result.cmu is not None and result.cmu.ok
    for state in range(1, 6):
        action = result.best_policy.action(state)
        if action[1] >= 1:               # group 2 on somewhere
            assert action[0] == 1        # then group 1 is fully on
    assert result.runner_up_gap is not None and result.runner_up_gap > 0.0


def test_max_mode_on_reward_chain():
    from avgmdp import approaching_reward_chain

    chain = approaching_reward_chain()
    result = exhaustive_search(chain, 4, ConstantTail(1), mode="max")
    # Best reward within 5 describable states: stay at the last free state.
    assert result.best_eta.value == pytest.approx(0.75, rel=1e-12)


def test_search_rejects_unknown_mode():
    with pytest.raises(ValueError):
        exhaustive_search(two_group(1.0), 1, AllOnTail(), mode="argmax")


def test_parallel_matches_serial():
    model = two_group(1.0)
    serial = exhaustive_search(model, 5, AllOnTail(), tol=1e-8, workers=1)
    parallel = exhaustive_search(model, 5, AllOnTail(), tol=1e-8, workers=2)
    assert serial.best_policy == parallel.best_policy
    assert serial.best_eta == parallel.best_eta


# --- c/mu structure -----------------------------------------------------------

def test_priority_order_by_ratio_then_index():
    assert cmu_priority(two_group(1.0)) == [0, 1]        # 0.5 < 1.0
    tied = GroupServerModel(
        arrival_rate=0.5,
        groups=(ServerGroup(1, 2.0, 2.0), ServerGroup(1, 2.0, 2.0)),
        holding=PolynomialHolding((0.0, 1.0)))
    assert cmu_priority(tied) == [0, 1]


def test_cmu_policy_all_zero_thresholds_is_all_on():
    model = two_group(1.0)
    u = cmu_policy(model, [0, 0])
    for state in range(0, 6):
        assert u.action(state) == (1, 1)


def test_cmu_policy_staggered_thresholds():
    model = two_group(1.0)
    u = cmu_policy(model, [0, 3])
    assert u.action(0) == (1, 0)
    assert u.action(2) == (1, 0)
    assert u.action(3) == (1, 1)
    assert u.action(9) == (1, 1)


def test_cmu_policy_rejects_decreasing_thresholds():
    with pytest.raises(ValueError):
        cmu_policy(two_group(1.0), [3, 0])


def test_cmu_policy_rejects_floor_violation():
    # Group 2 is the cheaper ratio here, so its server leads the order;
    # delaying group 1 past state 1 leaves no group-1 server on there.
    model = GroupServerModel(
        arrival_rate=0.5,
        groups=(ServerGroup(1, 2.0, 1.0), ServerGroup(1, 1.0, 0.1)),
        holding=PolynomialHolding((0.0, 1.0)))
    assert cmu_priority(model) == [1, 0]
    with pytest.raises(PolicyBindingError):
        cmu_policy(model, [0, 3])


def test_verify_cmu_accepts_all_on():
    model = two_group(1.0)
    assert verify_cmu(model, cmu_policy(model, [0, 0])).ok


def test_verify_cmu_witness_for_inverted_activation():
    model = two_group(1.0)
    u = Policy(prefix=((0, 1),), tail=AllOnTail()).bind(model)
    check = verify_cmu(model, u)
    assert not check.ok
    assert check.witness == (0, 0, 1)
