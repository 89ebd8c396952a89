"""Exhaustive policy search over prefix-enumerable classes, plus the
cost-to-rate priority structure of queue optima.

The search space is every policy with a free action prefix of length L and
a fixed tail rule; states beyond the prefix contribute geometrically little
(that is exactly what the policy metric encodes), so desk-scale optima live
in this class.  Candidates are enumerated lexicographically and ties keep
the earliest candidate, which makes results bit-reproducible; unstable
candidates are skipped rather than failing the search.

For group-server queues, optimal switching follows the cost-to-rate order:
a server group with a smaller c/mu ratio should be fully on before any
server of a strictly larger ratio is switched on.  `cmu_policy` builds
threshold policies honoring that order and `verify_cmu` checks an
arbitrary policy against it, reporting the first violation instead of
assuming the structure holds.
"""

from __future__ import annotations

import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .common import (
    Bounded,
    KCapExceededError,
    PolicyBindingError,
    UnstablePolicyError,
)
from .evaluate import evaluate_eta
from .policies import (
    DEFAULT_ENUMERATION_CAP,
    ConstantTail,
    Policy,
    TailRule,
    bound_to,
    enumerate_prefixes,
)
from .queueing import GroupServerModel


@dataclass(frozen=True)
class EvalRecord:
    policy: Policy
    eta: Bounded | None          # None when the candidate was unstable


@dataclass(frozen=True)
class CmuCheck:
    """Outcome of the priority-order check with the first violation, as a
    (state, lower-priority group, active group) triple, when it fails."""

    ok: bool
    witness: tuple[int, int, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class SearchResult:
    """`evaluated` counts every enumerated candidate (so it equals the
    enumeration cardinality); `skipped_unstable` of them had no stability
    certificate and carry eta = None in `records`."""

    best_policy: Policy
    best_eta: Bounded
    evaluated: int
    skipped_unstable: int
    runner_up_gap: float | None
    cmu: CmuCheck | None
    mode: str
    records: tuple[EvalRecord, ...]


def _evaluate_one(args) -> tuple[float, float] | None:
    model, policy, tol = args
    try:
        eta = evaluate_eta(model, policy, tol)
    except UnstablePolicyError:
        return None
    except KCapExceededError:
        # The generic solver's analogue of instability: the truncation
        # never stabilized for this candidate.
        return None
    return (eta.value, eta.bound)


def _evaluate_all(model, policies, tol, workers):
    jobs = [(model, p, tol) for p in policies]
    if workers > 1 and len(jobs) >= 4 * workers:
        try:
            pickle.dumps(model)
        except Exception:
            workers = 1
    if workers > 1 and len(jobs) >= 4 * workers:
        chunk = max(1, len(jobs) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate_one, jobs, chunksize=chunk))
    return [_evaluate_one(job) for job in jobs]


def exhaustive_search(model, length: int, tail: TailRule, tol: float = 1e-8,
                      cap: int | None = DEFAULT_ENUMERATION_CAP,
                      mode: str = "min", workers: int = 1) -> SearchResult:
    """Evaluate every prefix-`length` policy with the given tail and return
    the optimizer (min by default, max for reward models)."""
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    policies = list(enumerate_prefixes(model, length, tail, cap=cap))
    outcomes = _evaluate_all(model, policies, tol, workers)

    sign = 1.0 if mode == "min" else -1.0
    records = []
    best_idx = None
    best_key = None
    ranked = []
    for idx, (policy, outcome) in enumerate(zip(policies, outcomes)):
        if outcome is None:
            records.append(EvalRecord(policy=policy, eta=None))
            continue
        eta = Bounded(*outcome)
        records.append(EvalRecord(policy=policy, eta=eta))
        key = sign * eta.value
        ranked.append(key)
        if best_key is None or key < best_key:
            best_key = key
            best_idx = idx
    if best_idx is None:
        raise UnstablePolicyError(
            f"all {len(policies)} candidate policies are unstable for this model")

    ranked.sort()
    gap = ranked[1] - ranked[0] if len(ranked) >= 2 else None
    best_policy = policies[best_idx]
    best_eta = records[best_idx].eta
    cmu = verify_cmu(model, best_policy) if isinstance(model, GroupServerModel) else None
    return SearchResult(best_policy=best_policy, best_eta=best_eta,
                        evaluated=len(policies),
                        skipped_unstable=sum(1 for r in records if r.eta is None),
                        runner_up_gap=gap, cmu=cmu, mode=mode,
                        records=tuple(records))


def cmu_priority(model: GroupServerModel) -> list[int]:
    """Group indices sorted by ascending c/mu, ties to the smaller index."""
    ratios = [(g.cost / g.rate, k) for k, g in enumerate(model.groups)]
    return [k for _, k in sorted(ratios)]


def cmu_policy(model: GroupServerModel, thresholds) -> Policy:
    """Threshold policy in cost-to-rate priority order.

    `thresholds` lists one activation state per server, aligned to the
    servers flattened in ascending c/mu order (ties to the smaller group
    index); server j is on at state n iff n >= thresholds[j].  Cheaper
    capacity must not switch on later than pricier capacity, so the list
    must be nondecreasing.
    """
    order = cmu_priority(model)
    total = sum(g.servers for g in model.groups)
    thresholds = list(thresholds)
    if len(thresholds) != total:
        raise ValueError(
            f"need one threshold per server ({total}), got {len(thresholds)}")
    if any(t < 0 for t in thresholds):
        raise ValueError("thresholds must be nonnegative states")
    if any(a > b for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be nondecreasing in the c/mu order")

    server_groups = [k for k in order for _ in range(model.groups[k].servers)]

    def action_at(n: int) -> tuple[int, ...]:
        counts = [0] * len(model.groups)
        for group, threshold in zip(server_groups, thresholds):
            if n >= threshold:
                counts[group] += 1
        return tuple(counts)

    horizon = max(thresholds, default=0)
    for n in range(1, horizon + 1):
        if model.require_busy_floor and action_at(n)[0] == 0:
            raise PolicyBindingError(
                f"thresholds leave every group-1 server off at state {n}, "
                "violating the busy floor a_1 >= 1")
    prefix = tuple(action_at(n) for n in range(horizon))
    return Policy(prefix=prefix, tail=ConstantTail(action_at(horizon)),
                  label="cmu-threshold").bind(model)


def verify_cmu(model: GroupServerModel, u: Policy) -> CmuCheck:
    """True iff at every described state, whenever any server of some
    ratio class is on, every group of a strictly smaller c/mu ratio is
    fully on.  The witness names the first (state, idle group, active
    group) violation."""
    u = bound_to(model, u)
    ratios = [g.cost / g.rate for g in model.groups]
    states = list(range(len(u.prefix) + 1))  # prefix states plus one tail state
    for state in states:
        action = u.action(state)
        for active, count in enumerate(action):
            if count == 0:
                continue
            for other, g in enumerate(model.groups):
                if ratios[other] < ratios[active] and action[other] < g.servers:
                    return CmuCheck(ok=False, witness=(state, other, active))
    return CmuCheck(ok=True)
