"""Shared model instances and independent oracles for the test suite.

Every oracle here is written from scratch against the defining series
(plain Python loops over partial products), never by calling the package's
own truncation machinery, so the dual-route checks stay meaningful.
"""

from __future__ import annotations

from avgmdp import (
    AllOnTail,
    GroupServerModel,
    Policy,
    PolynomialHolding,
    ServerGroup,
    SignedLinearHolding,
)


def mm1(lam: float, mu: float = 1.0, cost: float = 0.0,
        holding=None) -> GroupServerModel:
    return GroupServerModel(
        arrival_rate=lam,
        groups=(ServerGroup(servers=1, rate=mu, cost=cost),),
        holding=holding if holding is not None else PolynomialHolding((0.0, 1.0)))


def signed_mm1(lam: float = 0.5, mu: float = 1.0) -> GroupServerModel:
    return GroupServerModel(
        arrival_rate=lam,
        groups=(ServerGroup(servers=1, rate=mu, cost=0.0),),
        holding=SignedLinearHolding())


def two_group(lam: float, costs=(1.0, 1.0)) -> GroupServerModel:
    return GroupServerModel(
        arrival_rate=lam,
        groups=(ServerGroup(servers=1, rate=2.0, cost=costs[0]),
                ServerGroup(servers=1, rate=1.0, cost=costs[1])),
        holding=PolynomialHolding((0.0, 1.0)))


def always_on(model: GroupServerModel) -> Policy:
    return Policy(prefix=(), tail=AllOnTail()).bind(model)


def birth_death_corpus():
    """(model, policy) pairs with certificate ratios spanning [0.2, 0.9]."""
    pairs = []
    for lam in (0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
        model = mm1(lam)
        pairs.append((model, always_on(model)))
    # Two-group instances, including prefixes that locally slow service.
    m = two_group(0.6)
    pairs.append((m, always_on(m)))
    m = two_group(1.5)
    pairs.append((m, always_on(m)))
    m = two_group(1.5)
    pairs.append((m, Policy(prefix=((0, 0), (1, 0)), tail=AllOnTail()).bind(m)))
    m = two_group(2.7)   # all-on rate 3 -> ratio 0.9
    pairs.append((m, always_on(m)))
    return pairs


# ---------------------------------------------------------------------------
# Independent oracles.

def brute_products(lam: float, rate_at, upto: int) -> list[float]:
    """Partial products p_n = prod_{l<=n} lam / rate_at(l), p_0 = 1."""
    products = [1.0]
    for n in range(1, upto + 1):
        products.append(products[-1] * lam / rate_at(n))
    return products


def brute_eta(lam: float, rate_at, f_at, upto: int = 6000) -> float:
    """Stationary average by direct summation of the product-form series."""
    products = brute_products(lam, rate_at, upto)
    total = sum(products)
    return sum(p * f_at(n) for n, p in enumerate(products)) / total


def brute_pi(lam: float, rate_at, upto: int = 6000) -> list[float]:
    products = brute_products(lam, rate_at, upto)
    total = sum(products)
    return [p / total for p in products]


def brute_distance(actions1, actions2, r: float) -> float:
    """Metric distance from two explicit (long) action vectors."""
    return sum(r ** i for i, (a, b) in enumerate(zip(actions1, actions2)) if a != b)
