"""Single entry point for evaluating eta(u) across the model families."""

from __future__ import annotations

from functools import singledispatch

from .common import Bounded
from .ctmdp import GenericCtmdpModel, average_cost_generic
from .linechain import LineChainModel, eta_line
from .policies import Policy
from .queueing import GroupServerModel, average_cost


@singledispatch
def evaluate_eta(model, policy: Policy, tol: float = 1e-8) -> Bounded:
    """Long-run average of `policy` on `model` with an error bound.

    Dispatches to the product-form engine for queues, absorption analysis
    (exact, bound 0) for line chains, and the truncated balance solver for
    generic CTMDPs.
    """
    raise TypeError(f"no eta evaluator for model type {type(model).__name__}")


@evaluate_eta.register
def _(model: GroupServerModel, policy: Policy, tol: float = 1e-8) -> Bounded:
    return average_cost(model, policy, tol)


@evaluate_eta.register
def _(model: LineChainModel, policy: Policy, tol: float = 1e-8) -> Bounded:
    return Bounded(value=eta_line(model, policy), bound=0.0)


@evaluate_eta.register
def _(model: GenericCtmdpModel, policy: Policy, tol: float = 1e-8) -> Bounded:
    return average_cost_generic(model, policy, tol)
