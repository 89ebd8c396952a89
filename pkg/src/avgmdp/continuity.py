"""Perturbation bounds between nearby policies.

For two queue policies agreeing through state n the partial products
p_m coincide for m <= n, so the normalizers relate through a single scalar

    (1 + G(u)) / (1 + G(u')) = 1 + sigma,     -delta(n, u') < sigma < delta(n, u),

with delta the partial-product tail.  That sandwich drives an exact
decomposition of the cost difference,

    eta(u') - eta(u) = sigma * sum_{m<=n} pi(m, u) f(m, u)
                       + sum_{m>n} [pi(m, u') f(m, u') - pi(m, u) f(m, u)],

whose two pieces this module evaluates from certified truncations: the
head from the shared products, the tail from both steady states with
explicit geometric remainders.  The resulting `rigorous_bound` dominates
the directly measured |eta(u') - eta(u)| on every pair -- that inequality
is the computational content of average-cost continuity in the policy
metric, and `modulus_scan` exhibits how it decays (or refuses to decay,
for the reward line chain) as the agreement prefix grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .common import Bounded, UnstablePolicyError
from .evaluate import evaluate_eta
from .linechain import LineChainModel, eta_line, first_stay_state
from .policies import MetricParams, Policy, bound_to, distance, prefix_agreement
from .queueing import (
    GroupServerModel,
    delta,
    log_products,
    stability_certificate,
    steady_state,
)
from .series import certified_tail_sum


@dataclass(frozen=True)
class ContinuityReport:
    """Everything known about one policy pair.

    The sigma fields are None for line-chain models, where the bound comes
    from the payoff range beyond the agreement prefix instead of the
    normalizer sandwich.  `sandwich_strict` is None when degenerate
    (lambda = 0 makes sigma and both deltas exactly zero).
    """

    agreement: float                     # int, or math.inf for equal policies
    distance: float
    sigma: float | None
    sigma_lower: float | None            # -delta(n, u')
    sigma_upper: float | None            # +delta(n, u)
    head_sum: float | None
    head_term: float | None
    tail_term: float | None
    tail_remainder: float | None
    eta_u: Bounded
    eta_u2: Bounded
    eta_diff: float
    rigorous_bound: float
    sandwich_strict: bool | None


def _effective_agreement(model, u: Policy, u2: Policy) -> tuple[float, int]:
    """(true agreement, finite index n used by the machinery)."""
    agreement = prefix_agreement(u, u2)
    if agreement == -1:
        raise ValueError(
            "policies disagree at the first state (agreement -1); the "
            "normalizer machinery needs agreement through state 0 -- "
            "only the metric distance is meaningful here")
    if agreement == math.inf:
        return math.inf, max(len(u.prefix), len(u2.prefix), 1)
    return agreement, int(agreement)


def _cost_tail_remainder(model: GroupServerModel, u: Policy, upto: int,
                         logs: np.ndarray, G: float) -> float:
    """Certified bound on sum_{m>upto} pi(m, u) |f(m, u(m))|."""
    cert = stability_certificate(model, u)
    if cert.rho0 == 0.0:
        return 0.0
    tail_cost = model.operating_cost(u.tail.constant_value(model))
    habs = model.holding.majorant_coeffs
    p_upto = math.exp(logs[upto])
    return p_upto * certified_tail_sum(cert.rho0, upto, habs, tail_cost) / (1.0 + G)


def sigma(model: GroupServerModel, u: Policy, u2: Policy, tol: float = 1e-10,
          metric: MetricParams = MetricParams()) -> ContinuityReport:
    """Normalizer ratio sigma = (1+G(u))/(1+G(u2)) - 1 with its sandwich
    -delta(n, u2) < sigma < delta(n, u); eta fields left for
    `eta_diff_bound`."""
    u = bound_to(model, u)
    u2 = bound_to(model, u2)
    agreement, n = _effective_agreement(model, u, u2)
    dist = distance(u, u2, metric)
    g_tol = min(tol, 1e-12)

    G_u = steady_state(model, u, g_tol).G
    G_u2 = steady_state(model, u2, g_tol).G
    sig = (1.0 + G_u) / (1.0 + G_u2) - 1.0
    d_u = delta(model, u, n)
    d_u2 = delta(model, u2, n)
    lower, upper = -d_u2.value, d_u.value
    degenerate = sig == 0.0 and lower == 0.0 and upper == 0.0
    strict = None if degenerate else (lower < sig < upper)

    eta_u = evaluate_eta(model, u, tol)
    eta_u2 = evaluate_eta(model, u2, tol)
    return ContinuityReport(
        agreement=agreement, distance=dist, sigma=sig,
        sigma_lower=lower, sigma_upper=upper,
        head_sum=None, head_term=None, tail_term=None, tail_remainder=None,
        eta_u=eta_u, eta_u2=eta_u2, eta_diff=eta_u2.value - eta_u.value,
        rigorous_bound=math.inf, sandwich_strict=strict)


def _queue_eta_diff_bound(model: GroupServerModel, u: Policy, u2: Policy,
                          tol: float, metric: MetricParams) -> ContinuityReport:
    partial = sigma(model, u, u2, tol, metric)
    _, n = _effective_agreement(model, u, u2)
    sig = partial.sigma
    g_tol = min(tol, 1e-12)

    ss_u = steady_state(model, u, g_tol)
    ss_u2 = steady_state(model, u2, g_tol)
    cert_u = stability_certificate(model, u)
    cert_u2 = stability_certificate(model, u2)
    upto = max(n + 1,
               ss_u.n_trunc, ss_u2.n_trunc,
               cert_u.n_bar, cert_u2.n_bar,
               len(u.prefix), len(u2.prefix))

    logs_u = log_products(model, u, upto)
    logs_u2 = log_products(model, u2, upto)
    norm_u = 1.0 + ss_u.G
    norm_u2 = 1.0 + ss_u2.G
    # Certified relative error of each normalizer (un-summed G tail).
    rel_u = ss_u.tail_mass_bound
    rel_u2 = ss_u2.tail_mass_bound

    head_terms = [math.exp(logs_u[m]) / norm_u * model.cost_rate(m, u.action(m))
                  for m in range(n + 1)]
    head_sum = math.fsum(head_terms)
    head_abs = math.fsum(abs(t) for t in head_terms)
    head_term = sig * head_sum

    tail_u2_terms = [math.exp(logs_u2[m]) / norm_u2 * model.cost_rate(m, u2.action(m))
                     for m in range(n + 1, upto + 1)]
    tail_u_terms = [math.exp(logs_u[m]) / norm_u * model.cost_rate(m, u.action(m))
                    for m in range(n + 1, upto + 1)]
    tail_term = math.fsum(t2 - t1 for t2, t1 in zip(tail_u2_terms, tail_u_terms))
    tail_abs_u = math.fsum(abs(t) for t in tail_u_terms)
    tail_abs_u2 = math.fsum(abs(t) for t in tail_u2_terms)
    remainder = ((1.0 + rel_u) * _cost_tail_remainder(model, u, upto, logs_u, ss_u.G)
                 + (1.0 + rel_u2) * _cost_tail_remainder(model, u2, upto, logs_u2,
                                                         ss_u2.G))

    # |eta diff| <= |sigma| |head| + |tail| holds for the true quantities;
    # each computed piece is widened by its certified normalizer slack
    # (sigma through interval arithmetic on both G's), the remainders cover
    # the cut tails, the eta bounds cover the two direct evaluations being
    # compared, and a scale-proportional pad absorbs floating-point noise.
    sig_slack = rel_u * norm_u / norm_u2 * (1.0 + rel_u2) \
        + (norm_u / norm_u2) * rel_u2
    float_pad = 1e-12 * (1.0 + head_abs + tail_abs_u + tail_abs_u2
                         + abs(partial.eta_u.value) + abs(partial.eta_u2.value))
    bound = ((abs(sig) + sig_slack) * (abs(head_sum) + rel_u * head_abs)
             + abs(tail_term) + rel_u * tail_abs_u + rel_u2 * tail_abs_u2
             + remainder + partial.eta_u.bound + partial.eta_u2.bound
             + float_pad)
    return ContinuityReport(
        agreement=partial.agreement, distance=partial.distance, sigma=sig,
        sigma_lower=partial.sigma_lower, sigma_upper=partial.sigma_upper,
        head_sum=head_sum, head_term=head_term,
        tail_term=tail_term, tail_remainder=remainder,
        eta_u=partial.eta_u, eta_u2=partial.eta_u2,
        eta_diff=partial.eta_diff, rigorous_bound=bound,
        sandwich_strict=partial.sandwich_strict)


def _line_eta_diff_bound(model: LineChainModel, u: Policy, u2: Policy,
                         metric: MetricParams) -> ContinuityReport:
    u = bound_to(model, u)
    u2 = bound_to(model, u2)
    agreement, n = _effective_agreement(model, u, u2)
    dist = distance(u, u2, metric)
    eta_u = Bounded(eta_line(model, u), 0.0)
    eta_u2 = Bounded(eta_line(model, u2), 0.0)
    diff = eta_u2.value - eta_u.value

    stay = first_stay_state(model, u)
    shared_stay = stay is not None and stay - model.start_state <= n
    if agreement == math.inf or shared_stay:
        # Both walks absorb at the same state (or the policies are equal).
        bound = 0.0
    else:
        first_free = model.start_state + n + 1
        # Both values lie in {0} union {payoff(i): i >= first_free}; the
        # built-in payoffs are monotone, so the spread is closed-form.
        if model.mode == "cost":
            bound = abs(model.stay_payoff(first_free))
        else:
            bound = model.eta_star
    return ContinuityReport(
        agreement=agreement, distance=dist, sigma=None,
        sigma_lower=None, sigma_upper=None,
        head_sum=None, head_term=None, tail_term=None, tail_remainder=None,
        eta_u=eta_u, eta_u2=eta_u2, eta_diff=diff,
        rigorous_bound=bound, sandwich_strict=None)


def eta_diff_bound(model, u: Policy, u2: Policy, tol: float = 1e-10,
                   metric: MetricParams = MetricParams()) -> ContinuityReport:
    """Full continuity report for a policy pair: the decomposition terms,
    the directly measured eta difference, and a certified bound on it."""
    if isinstance(model, GroupServerModel):
        return _queue_eta_diff_bound(model, u, u2, tol, metric)
    if isinstance(model, LineChainModel):
        return _line_eta_diff_bound(model, u, u2, metric)
    raise TypeError(f"no continuity machinery for {type(model).__name__}")


@dataclass(frozen=True)
class ModulusRow:
    """One neighborhood O_{r^k}(u) in a modulus scan."""

    k: int
    samples: int
    skipped_unstable: int
    max_abs_diff: float
    max_bound: float
    exhausted: bool      # no admissible mutation beyond position k
    noisy: bool          # a column increased vs. the previous row


def neighborhood_sampler(model, u: Policy, k: int, count: int,
                         rng: np.random.Generator, span: int = 6) -> list[Policy]:
    """Policies agreeing with `u` at positions <= k, mutated within the next
    `span` positions.  Deterministic single-point mutations come first
    (every alternative action, nearest positions first), then random
    multi-point ones; at most `count` policies are returned."""
    u = bound_to(model, u)
    start = model.start_state
    length = k + 1 + span
    base = [u.action(p) for p in range(length)]

    variants: list[Policy] = []
    seen = set()

    def push(prefix: tuple) -> None:
        if prefix not in seen:
            seen.add(prefix)
            variants.append(Policy(prefix=prefix, tail=u.tail).bind(model))

    for pos in range(k + 1, length):
        for alt in model.action_set(start + pos):
            if alt == base[pos]:
                continue
            push(tuple(base[:pos]) + (alt,) + tuple(base[pos + 1:]))
            if len(variants) >= count:
                return variants
    if not variants:
        return []
    attempts = 0
    while len(variants) < count and attempts < 50 * count:
        attempts += 1
        mutated = list(base)
        changed = False
        for pos in range(k + 1, length):
            if rng.random() < 0.5:
                options = [a for a in model.action_set(start + pos) if a != mutated[pos]]
                if options:
                    mutated[pos] = options[int(rng.integers(len(options)))]
                    changed = True
        if changed:
            push(tuple(mutated))
    return variants


def modulus_scan(model, u: Policy, ks: Sequence[int], tol: float = 1e-10,
                 sampler: Callable | None = None, samples_per_k: int = 12,
                 seed: int = 0,
                 metric: MetricParams = MetricParams()) -> list[ModulusRow]:
    """For each k, sample the neighborhood of policies agreeing with `u`
    through position k and record the worst observed |eta difference| and
    the worst rigorous bound.  Decaying columns exhibit a continuity
    modulus; a column pinned away from zero flags a discontinuity."""
    if not ks or list(ks) != sorted(ks):
        raise ValueError("ks must be a nonempty ascending list")
    u = bound_to(model, u)
    sample = sampler if sampler is not None else neighborhood_sampler
    rng = np.random.default_rng(seed)

    rows: list[ModulusRow] = []
    prev: ModulusRow | None = None
    for k in ks:
        policies = sample(model, u, k, samples_per_k, rng)
        max_diff = 0.0
        max_bound = 0.0
        skipped = 0
        for candidate in policies:
            try:
                report = eta_diff_bound(model, u, candidate, tol, metric)
            except UnstablePolicyError:
                skipped += 1
                continue
            max_diff = max(max_diff, abs(report.eta_diff))
            max_bound = max(max_bound, report.rigorous_bound)
        noisy = prev is not None and (max_diff > prev.max_abs_diff
                                      or max_bound > prev.max_bound)
        row = ModulusRow(k=k, samples=len(policies) - skipped,
                         skipped_unstable=skipped,
                         max_abs_diff=max_diff, max_bound=max_bound,
                         exhausted=not policies, noisy=noisy)
        rows.append(row)
        prev = row
    return rows
