"""Deterministic two-action chains evaluated exactly by absorption analysis.

States are 1, 2, 3, ...; action 1 advances to the next state with payoff 0,
action 0 stays put forever with payoff `stay_payoff(i)`.  Under any
stationary policy started at state 1 the chain walks right until the first
stay-state i* (if one exists) and absorbs there, so the long-run average is
simply stay_payoff(i*), and 0 when the chain drifts to infinity.  These
chains are deliberately non-ergodic and bypass the steady-state solvers;
absorption analysis is exact.

Two ready-made instances:

  * diminishing_cost_chain:    stay cost 1/i, optimal cost 0 (drift forever);
  * approaching_reward_chain:  stay reward 1 - 1/i, supremum 1 that no
    stationary policy attains -- the canonical witness that the average
    reward can fail to be continuous, hence fail to have a stationary
    optimizer, on a countable state space.

The reward chain also carries the one history-dependent schedule this
package reproduces: dwell i steps at state i, then advance once.  Its
running average climbs to 1, strictly above every stationary value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .common import UndecidableTailError
from .policies import Policy, bound_to


def _inverse(i: int) -> float:
    return 1.0 / i


def _one_minus_inverse(i: int) -> float:
    return 1.0 - 1.0 / i


@dataclass(frozen=True)
class LineChainModel:
    """Two-action stay-or-advance chain with a per-state stay payoff."""

    mode: str                              # "cost" or "reward"
    stay_payoff: Callable[[int], float]
    eta_star: float                        # optimal value over all policies

    start_state = 1
    action_space_constant_from = 1

    def __post_init__(self):
        if self.mode not in ("cost", "reward"):
            raise ValueError(f"mode must be 'cost' or 'reward', got {self.mode!r}")

    def action_set(self, state: int) -> tuple[int, int]:
        return (0, 1)


def diminishing_cost_chain() -> LineChainModel:
    return LineChainModel(mode="cost", stay_payoff=_inverse, eta_star=0.0)


def approaching_reward_chain() -> LineChainModel:
    return LineChainModel(mode="reward", stay_payoff=_one_minus_inverse, eta_star=1.0)


def first_stay_state(model: LineChainModel, u: Policy) -> int | None:
    """Smallest state with action 0 on the walk 1, 2, 3, ... (None = drift)."""
    u = bound_to(model, u)
    for pos, action in enumerate(u.prefix):
        if action == 0:
            return model.start_state + pos
    tail_action = u.tail.constant_value(model)
    if tail_action is None:
        raise UndecidableTailError(
            "absorption analysis needs an eventually constant tail rule")
    if tail_action == 0:
        return model.start_state + len(u.prefix)
    return None


def eta_line(model: LineChainModel, u: Policy) -> float:
    """Exact long-run average from state 1: stay_payoff at the first
    stay-state, or 0 when the policy advances forever."""
    stay = first_stay_state(model, u)
    return model.stay_payoff(stay) if stay is not None else 0.0


@dataclass(frozen=True)
class GapReport:
    """Best stationary value among policies describable within `budget`
    states, against the true optimum."""

    budget: int
    best_eta: float
    best_stay_state: int | None   # None when drifting forever is best
    eta_star: float
    gap: float


def stationary_supremum_gap(model: LineChainModel, budget: int) -> GapReport:
    """Maximize the stationary average over every policy whose finite
    description fits in `budget` states (free actions at states below
    `budget` plus a constant tail from there).

    Those policies absorb at some state i* <= budget or drift forever, so
    the best value is max(stay_payoff(1..budget), 0) -- evaluated by a
    direct scan, which stays exact for budgets far beyond anything an
    explicit enumeration could cover.  For the reward chain the gap to
    eta_star = 1 is 1/budget: positive for every finite budget.
    """
    if model.mode != "reward":
        raise ValueError("the stationary gap report is for reward chains")
    if budget < 1:
        raise ValueError(f"state budget must be >= 1, got {budget}")
    best_eta = 0.0
    best_stay: int | None = None
    for state in range(model.start_state, model.start_state + budget):
        value = model.stay_payoff(state)
        if value > best_eta:
            best_eta = value
            best_stay = state
    return GapReport(budget=budget, best_eta=best_eta, best_stay_state=best_stay,
                     eta_star=model.eta_star, gap=model.eta_star - best_eta)


def history_stream(limit: int):
    """First `limit` payoffs of the dwell-then-advance schedule on the
    reward chain: i copies of 1 - 1/i, then a 0 for the move, i = 1, 2, ..."""
    produced = 0
    state = 1
    while produced < limit:
        payoff = _one_minus_inverse(state)
        for _ in range(state):
            yield payoff
            produced += 1
            if produced == limit:
                return
        yield 0.0
        produced += 1
        state += 1


def history_stream_average(horizon: int) -> float:
    """Running average of the dwell-then-advance payoff stream after
    `horizon` steps."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    return sum(history_stream(horizon)) / horizon


def history_block_averages(horizon: int) -> list[float]:
    """Running averages sampled at each block boundary (just after an
    advance) within `horizon` steps; this sequence is nondecreasing and
    climbs to 1."""
    averages = []
    total = 0.0
    steps = 0
    state = 1
    while True:
        block = state * _one_minus_inverse(state)  # i stays, then a zero
        if steps + state + 1 > horizon:
            return averages
        total += block
        steps += state + 1
        averages.append(total / steps)
        state += 1
