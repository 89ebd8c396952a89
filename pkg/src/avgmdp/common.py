"""Shared result primitives and the package exception hierarchy."""

from __future__ import annotations

from dataclasses import dataclass


class AvgMdpError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AvgMdpError):
    """Malformed config text, policy literal, or inconsistent model declaration."""


class PolicyBindingError(AvgMdpError):
    """Policy is invalid for (or not bound to) the model at hand."""


class ErgodicityError(PolicyBindingError):
    """Policy leaves some state n >= 1 with zero aggregate service rate."""


class UndecidableTailError(AvgMdpError):
    """Tail rules whose pointwise disagreement is not eventually constant."""


class UnstablePolicyError(AvgMdpError):
    """No threshold beyond which the drift condition holds; the chain is not
    positive recurrent under this policy."""

    def __init__(self, message: str, violating_state: int | None = None,
                 rate: float | None = None):
        super().__init__(message)
        self.violating_state = violating_state
        self.rate = rate


class SearchSpaceTooLargeError(AvgMdpError):
    """Enumeration cardinality exceeds the configured cap."""


class KCapExceededError(AvgMdpError):
    """Truncation doubling hit the cap without the solution window stabilizing."""


class SingularTruncationError(AvgMdpError):
    """Anchored truncated balance system is singular (reducible truncation)."""


class NonConvergedError(AvgMdpError):
    """Solver produced a diagnostic that rules out a converged solution,
    e.g. materially negative stationary weights."""


class SelfCheckError(AvgMdpError):
    """An internal invariant failed while running in self-check mode."""


@dataclass(frozen=True)
class Bounded:
    """A computed value together with a certified absolute error bound.

    The contract is |true value - value| <= bound, with the bound built from
    explicit tail majorants (never from asymptotic arguments).
    """

    value: float
    bound: float
