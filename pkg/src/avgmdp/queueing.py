"""Group-server queue: product-form steady state with certified truncation.

The model is a single-buffer birth-death queue fed by a Poisson stream of
rate lambda and drained by K groups of parallel exponential servers that a
policy switches on and off per state.  With u(n) the action at state n and

    u(n)mu = sum_k u(n,k) * mu_k

the stationary weights are the partial products

    p_n = prod_{l=1..n} lambda / u(l)mu,         p_0 = 1,
    G(u) = sum_{n>=1} p_n,        pi(n) = p_n / (1 + G(u)),

and the chain is stable iff G(u) is finite.  Stability is certified by a
drift threshold: once u(n)mu > lambda for every n beyond some n_bar, the
ratio rho0 = max_{n > n_bar} lambda / u(n)mu < 1 turns every tail quantity
(G remainder, probability mass, cost remainder) into an explicit geometric
bound.  All truncation levels below are chosen adaptively from that
certificate; nothing relies on an a-priori cutoff.

Partial products are accumulated in the log domain so deep truncations
cannot underflow silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .common import Bounded, ErgodicityError, UndecidableTailError, UnstablePolicyError
from .policies import Action, Policy, bound_to
from .series import certified_tail_sum


@dataclass(frozen=True)
class ServerGroup:
    """A homogeneous group: `servers` parallel servers, each of service
    rate `rate`, costing `cost` per unit time while switched on."""

    servers: int
    rate: float
    cost: float

    def __post_init__(self):
        if self.servers < 1:
            raise ValueError(f"group needs at least one server, got {self.servers}")
        if self.rate <= 0.0:
            raise ValueError(f"service rate must be positive, got {self.rate}")
        if self.cost < 0.0:
            raise ValueError(f"operating cost must be nonnegative, got {self.cost}")


class HoldingCost:
    """Per-state holding cost h(n) with a declared polynomial majorant.

    The majorant (nonnegative ascending coefficients dominating |h(n)|)
    is what the certified cost-remainder bounds consume; it is declared,
    not inferred, because only polynomial growth is guaranteed to be
    controlled by the geometric rho0 factor.
    """

    kind: str

    def value(self, n: int) -> float:
        raise NotImplementedError

    @property
    def majorant_coeffs(self) -> tuple[float, ...]:
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialHolding(HoldingCost):
    """h(n) = sum_j coeffs[j] * n**j."""

    coeffs: tuple[float, ...]
    kind = "polynomial"

    def value(self, n: int) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * n + c
        return acc

    @property
    def majorant_coeffs(self) -> tuple[float, ...]:
        return tuple(abs(c) for c in self.coeffs)


@dataclass(frozen=True)
class SignedLinearHolding(HoldingCost):
    """h(n) = (-1)**n * n: unbounded below and above, |h(n)| = n."""

    kind = "signed_linear"

    def value(self, n: int) -> float:
        return float(n) if n % 2 == 0 else -float(n)

    @property
    def majorant_coeffs(self) -> tuple[float, ...]:
        return (0.0, 1.0)


@lru_cache(maxsize=None)
def _product_actions(sizes: tuple[int, ...], floor_first: bool) -> tuple[tuple[int, ...], ...]:
    ranges = [range(1 if (floor_first and k == 0) else 0, m + 1)
              for k, m in enumerate(sizes)]
    return tuple(product(*ranges))


@dataclass(frozen=True)
class GroupServerModel:
    """Queue parameters; immutable, safe to share across worker evaluations.

    Groups are canonicalized to nonincreasing service rate on construction
    (stable sort), so group 1 is always a fastest group.  With the busy
    floor enabled (the default) every action at a state n >= 1 keeps at
    least one group-1 server on, which rules out zero aggregate rate.
    """

    arrival_rate: float
    groups: tuple[ServerGroup, ...]
    holding: HoldingCost
    require_busy_floor: bool = True

    start_state = 0
    action_space_constant_from = 1

    def __post_init__(self):
        if self.arrival_rate < 0.0:
            raise ValueError(f"arrival rate must be >= 0, got {self.arrival_rate}")
        if not self.groups:
            raise ValueError("at least one server group is required")
        ordered = tuple(sorted(self.groups, key=lambda g: -g.rate))
        object.__setattr__(self, "groups", ordered)

    @property
    def all_on_action(self) -> tuple[int, ...]:
        return tuple(g.servers for g in self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.servers for g in self.groups)

    @property
    def max_service_rate(self) -> float:
        return sum(g.servers * g.rate for g in self.groups)

    @property
    def max_operating_cost(self) -> float:
        return sum(g.servers * g.cost for g in self.groups)

    def action_set(self, state: int) -> tuple[tuple[int, ...], ...]:
        floored = self.require_busy_floor and state >= 1
        return _product_actions(self.sizes, floored)

    def operating_cost(self, action: tuple[int, ...]) -> float:
        return sum(a * g.cost for a, g in zip(action, self.groups))

    def cost_rate(self, state: int, action: tuple[int, ...]) -> float:
        """f(n, a) = h(n) + sum_k c_k a_k."""
        return self.holding.value(state) + self.operating_cost(action)

    def check_bound_policy(self, policy: Policy) -> None:
        # Zero aggregate rate at any n >= 1 breaks ergodicity; reject eagerly.
        for pos in range(1, len(policy.prefix)):
            if service_rate(self, policy.prefix[pos]) == 0.0:
                raise ErgodicityError(
                    f"aggregate service rate is zero at state {pos}")
        tail_action = policy.tail.constant_value(self)
        if tail_action is not None and service_rate(self, tail_action) == 0.0:
            raise ErgodicityError(
                f"aggregate service rate is zero at every tail state >= "
                f"{max(len(policy.prefix), 1)}")


def all_on_policy(model: GroupServerModel, off_at_zero: bool = True) -> Policy:
    """Every server on wherever work can exist; idle action at state 0 when
    `off_at_zero` (the empty system accrues no service)."""
    from .policies import AllOnTail  # local import avoids a module cycle

    if off_at_zero:
        zero = tuple(0 for _ in model.groups)
        return Policy(prefix=(zero,), tail=AllOnTail()).bind(model)
    return Policy(prefix=(), tail=AllOnTail()).bind(model)


def service_rate(model: GroupServerModel, action: tuple[int, ...]) -> float:
    """Aggregate rate sum_k a_k mu_k of an on/off action."""
    if len(action) != len(model.groups):
        raise ValueError(
            f"action has {len(action)} components, model has {len(model.groups)} groups")
    for k, (a, g) in enumerate(zip(action, model.groups)):
        if not 0 <= a <= g.servers:
            raise ValueError(
                f"action component {a} out of range 0..{g.servers} in group {k + 1}")
    return sum(a * g.rate for a, g in zip(action, model.groups))


@dataclass(frozen=True)
class StabilityCertificate:
    """Geometric drift certificate: lambda / u(n)mu <= rho0 < 1 for every
    state n > n_bar."""

    rho0: float
    n_bar: int


def _tail_action(model: GroupServerModel, u: Policy) -> Action:
    action = u.tail.constant_value(model)
    if action is None:
        raise UndecidableTailError(
            "stability scan needs an eventually constant tail rule")
    return action


def stability_certificate(model: GroupServerModel, u: Policy) -> StabilityCertificate:
    """Scan the prefix states and the tail rule for the drift condition
    u(n)mu > lambda beyond a threshold.

    Raises UnstablePolicyError (carrying the first violating tail state)
    when the tail itself violates drift, and ErgodicityError when some
    state n >= 1 has zero aggregate rate.
    """
    u = bound_to(model, u)
    lam = model.arrival_rate
    prefix_len = len(u.prefix)
    tail_action = _tail_action(model, u)
    tail_rate = service_rate(model, tail_action)

    rates = {n: service_rate(model, u.prefix[n]) for n in range(1, prefix_len)}
    for n, rate in rates.items():
        if rate == 0.0:
            raise ErgodicityError(f"aggregate service rate is zero at state {n}")
    if tail_rate == 0.0:
        raise ErgodicityError(
            f"aggregate service rate is zero at every state >= {max(prefix_len, 1)}")

    if tail_rate <= lam:
        first_tail_state = max(prefix_len, 1)
        raise UnstablePolicyError(
            f"drift condition fails at every tail state >= {first_tail_state}: "
            f"u(n)mu = {tail_rate} <= lambda = {lam}",
            violating_state=first_tail_state, rate=tail_rate)

    n_bar = 0
    for n, rate in rates.items():
        if rate <= lam:
            n_bar = max(n_bar, n)
    ratios = [lam / tail_rate]
    ratios += [lam / rate for n, rate in rates.items() if n > n_bar]
    return StabilityCertificate(rho0=max(ratios), n_bar=n_bar)


@dataclass(frozen=True)
class QueueSteadyState:
    """Truncated steady state with a certified tail-mass bound.

    `pi` is normalized over the retained window 0..n_trunc, so it sums to
    one exactly; `tail_mass_bound` covers the true probability sitting
    beyond the window, whence sum(pi) + tail_mass_bound >= 1 >= sum(pi).
    """

    pi: np.ndarray
    G: float
    n_trunc: int
    tail_mass_bound: float
    rho0: float
    n_bar: int
    log_products: np.ndarray

    def product(self, n: int) -> float:
        """Partial product p_n (exact to within log-domain rounding)."""
        return math.exp(self.log_products[n])


def _log_ratio(model: GroupServerModel, u: Policy, n: int) -> float:
    lam = model.arrival_rate
    rate = service_rate(model, u.action(n))
    if lam == 0.0:
        return -math.inf
    return math.log(lam) - math.log(rate)


def log_products(model: GroupServerModel, u: Policy, upto: int) -> np.ndarray:
    """log p_n for n = 0..upto (p_0 = 1)."""
    u = bound_to(model, u)
    logs = np.empty(upto + 1)
    logs[0] = 0.0
    acc = 0.0
    for n in range(1, upto + 1):
        acc += _log_ratio(model, u, n)
        logs[n] = acc
    return logs


def steady_state(model: GroupServerModel, u: Policy, tol: float) -> QueueSteadyState:
    """Product-form steady state truncated at the smallest level whose
    certified geometric G-tail drops below tol * (1 + G_partial)."""
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    u = bound_to(model, u)
    cert = stability_certificate(model, u)
    rho0, n_bar = cert.rho0, cert.n_bar
    floor_n = max(n_bar, len(u.prefix) - 1, 1)

    logs = [0.0]
    G = 0.0
    log_p_nbar = 0.0 if n_bar == 0 else None
    n = 0
    while True:
        n += 1
        logs.append(logs[-1] + _log_ratio(model, u, n))
        G += math.exp(logs[-1])
        if n == n_bar:
            log_p_nbar = logs[-1]
        if n < floor_n:
            continue
        if rho0 == 0.0:
            tail = 0.0
        else:
            tail = math.exp(log_p_nbar + (n - n_bar + 1) * math.log(rho0)) / (1.0 - rho0)
        if tail <= tol * (1.0 + G):
            break
        if n > 50_000_000:  # certificate guarantees termination long before
            raise RuntimeError("steady-state truncation failed to terminate")

    norm = 1.0 + G
    log_arr = np.array(logs)
    pi = np.exp(log_arr) / norm
    return QueueSteadyState(pi=pi, G=G, n_trunc=n, tail_mass_bound=tail / norm,
                            rho0=rho0, n_bar=n_bar, log_products=log_arr)


def average_cost(model: GroupServerModel, u: Policy, tol: float) -> Bounded:
    """Long-run average cost eta(u) = sum_n pi(n) f(n, u(n)) with a
    certified absolute error bound <= tol.

    The truncation window is enlarged until the combined remainder
    (cost tail dominated by p_N * rho0**m against the declared polynomial
    holding majorant, plus the normalizer skew from the G tail) is within
    tol; a safety factor of one half keeps reported values from two
    different tolerances within the coarser one of each other.
    """
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    u = bound_to(model, u)
    cert = stability_certificate(model, u)
    rho0, n_bar = cert.rho0, cert.n_bar
    floor_n = max(n_bar, len(u.prefix) - 1, 1)

    tail_cost = model.operating_cost(_tail_action(model, u))
    habs = model.holding.majorant_coeffs

    log_p = 0.0
    G = 0.0
    weighted = model.cost_rate(0, u.action(0))  # p_0 * f(0, u(0))
    n = 0
    while True:
        n += 1
        log_p += _log_ratio(model, u, n)
        p_n = math.exp(log_p)
        G += p_n
        weighted += p_n * model.cost_rate(n, u.action(n))
        if n < floor_n:
            continue
        if rho0 == 0.0:
            remainder_cost = 0.0
            remainder_mass = 0.0
        else:
            remainder_cost = p_n * certified_tail_sum(rho0, n, habs, tail_cost)
            remainder_mass = p_n * rho0 / (1.0 - rho0)
        eta = weighted / (1.0 + G)
        bound = (remainder_cost + abs(eta) * remainder_mass) / (1.0 + G)
        if bound <= 0.5 * tol:
            return Bounded(value=eta, bound=bound)
        if n > 50_000_000:
            raise RuntimeError("average-cost truncation failed to terminate")


def delta(model: GroupServerModel, u: Policy, n: int) -> Bounded:
    """Tail of the partial-product series, delta(n, u) = sum_{m>n} p_m,
    with a certified geometric remainder."""
    if n < 0:
        raise ValueError(f"tail index must be >= 0, got {n}")
    u = bound_to(model, u)
    cert = stability_certificate(model, u)
    rho0, n_bar = cert.rho0, cert.n_bar

    log_p = 0.0
    for m in range(1, n + 1):
        log_p += _log_ratio(model, u, m)
    value = 0.0
    m = n
    while True:
        m += 1
        log_p += _log_ratio(model, u, m)
        p_m = math.exp(log_p)
        value += p_m
        if m < max(n_bar, n) + 1:
            continue
        remainder = 0.0 if rho0 == 0.0 else p_m * rho0 / (1.0 - rho0)
        if remainder <= 1e-15 * (value + 1.0):
            return Bounded(value=value, bound=remainder)
        if m > 50_000_000:
            raise RuntimeError("delta truncation failed to terminate")
