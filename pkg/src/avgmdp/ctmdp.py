"""Truncated balance-equation solver for banded countable-state CTMDPs.

For a generator q^a(i, j) the stationary weights nu of a fixed policy u
solve sum_j nu(j) q^{u(j)}(j, i) = 0 with finite total mass.  Two declared
model properties make the infinite system tractable:

  * every rate is bounded, |q^a(i, j)| <= rate_bound, and
  * backward reach is banded: q^a(j, i) = 0 whenever j > i + band,

so truncating at level K leaves a square (K+1) x (K+1) system in which
only the last `band` equations lose (provably small) terms.  Scaling
freedom is removed by anchoring nu(0) = 1: row 0 of the truncated system
is replaced by that equation, keeping the system square.

Truncation levels are not guessed: K is doubled from a small start until
the leading half-window of nu, the normalized distribution, and the
average cost all stop moving between consecutive solves.  The change at
the last doubling is reported as the error estimate.  (The anchored nu
entries alone stabilize long before the normalized quantities do --
an unstable chain settles into a near-flat nu while its distribution
keeps drifting -- so the stop rule watches all three.)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .common import (
    Bounded,
    KCapExceededError,
    NonConvergedError,
    SingularTruncationError,
)
from .policies import Action, Policy, bound_to
from .series import certified_tail_sum

DEFAULT_K_CAP = 8192

#: Negative stationary weights beyond this (anchored nu(0) = 1 fixes the
#: scale) signal a non-convergent truncation; smaller ones are roundoff.
NEGATIVE_NU_TOLERANCE = 1e-10


@dataclass(frozen=True)
class GenericCtmdpModel:
    """Countable-state CTMDP described by accessors.

    `action_sets(i)` lists the finite action set of state i, `rate(i, a, j)`
    the transition rate, and `cost(i, a)` the running cost.  `rate_bound`
    and `band` declare the two structural properties above; both are spot
    checked during assembly.  `forward_band`, when known, limits how far a
    single transition can jump up and shrinks assembly from O(K^2) rate
    queries to O(K).  `majorant = (C, gamma)` declares nu(i) <= C * gamma**i
    (summable), which yields the rigorous kappa perturbation bound;
    `cost_majorant_coeffs` declares |f(i, a)| <= poly(i) for the cost tail.
    """

    action_sets: Callable[[int], Sequence[Action]]
    rate: Callable[[int, Action, int], float]
    cost: Callable[[int, Action], float]
    rate_bound: float
    band: int
    forward_band: int | None = None
    majorant: tuple[float, float] | None = None
    cost_majorant_coeffs: tuple[float, ...] | None = None
    all_on_action: Action = None
    action_space_constant_from: int = 0

    start_state = 0

    def __post_init__(self):
        if self.rate_bound <= 0.0:
            raise ValueError(f"rate bound must be positive, got {self.rate_bound}")
        if self.band < 1:
            raise ValueError(f"backward band must be >= 1, got {self.band}")
        if self.majorant is not None:
            c, gamma = self.majorant
            if c <= 0.0 or not 0.0 <= gamma < 1.0:
                raise ValueError(f"majorant must be (C > 0, 0 <= gamma < 1), got {self.majorant}")

    def action_set(self, state: int) -> tuple[Action, ...]:
        return tuple(self.action_sets(state))


@dataclass
class TruncatedSystem:
    """Anchored (K+1) x (K+1) truncated balance system A nu = b."""

    matrix: csc_matrix
    rhs: np.ndarray
    k: int

    def solve(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                nu = spsolve(self.matrix, self.rhs)
            except MatrixRankWarning as exc:
                raise SingularTruncationError(
                    f"anchored truncated system at K={self.k} is singular "
                    "(reducible or non-ergodic truncation)") from exc
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        if not np.all(np.isfinite(nu)):
            raise SingularTruncationError(
                f"anchored truncated system at K={self.k} produced non-finite "
                "entries (numerically singular truncation)")
        return nu


def build_truncated_system(model: GenericCtmdpModel, u: Policy, K: int) -> TruncatedSystem:
    """Assemble sum_{j<=K} nu(j) q^{u(j)}(j, i) = 0 for i = 0..K, with row 0
    replaced by the anchor nu(0) = 1.

    During assembly the declared structure is enforced: every queried rate
    must respect `rate_bound`, off-diagonal rates must be nonnegative, and
    a handful of sampled pairs beyond the band must be zero.
    """
    if K < model.band:
        raise ValueError(f"truncation level K={K} must be >= band M={model.band}")
    u = bound_to(model, u)
    fb = model.forward_band if model.forward_band is not None else K
    bound = model.rate_bound

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for j in range(K + 1):
        a = u.action(j)
        lo = max(0, j - model.band)
        hi = min(K, j + fb)
        out_sum = 0.0
        for i in range(lo, hi + 1):
            q = model.rate(j, a, i)
            if q == 0.0:
                continue
            if abs(q) > bound * (1.0 + 1e-12):
                raise ValueError(
                    f"rate q({j}->{i}) = {q} exceeds the declared bound {bound}")
            if i != j and q < 0.0:
                raise ValueError(f"negative off-diagonal rate q({j}->{i}) = {q}")
            out_sum += q
            if i == 0:
                continue  # row 0 is replaced by the anchor
            rows.append(i)
            cols.append(j)
            vals.append(q)
        # Rows whose forward reach stays inside the window must be
        # conservative; rows near the cut may only leak outward.
        leak_tol = 1e-9 * max(1.0, bound)
        if model.forward_band is not None and j <= K - fb:
            if abs(out_sum) > leak_tol:
                raise ValueError(
                    f"generator row {j} does not sum to zero (sum = {out_sum})")
        elif out_sum > leak_tol:
            raise ValueError(
                f"generator row {j} has positive in-window sum {out_sum}")

    for j in {K, max(model.band + 1, K // 2), max(model.band + 1, (2 * K) // 3)}:
        i = j - model.band - 1
        if i >= 0:
            q = model.rate(j, u.action(j), i)
            if q != 0.0:
                raise ValueError(
                    f"band assumption violated: q({j}->{i}) = {q} with band {model.band}")

    rows.append(0)
    cols.append(0)
    vals.append(1.0)
    rhs = np.zeros(K + 1)
    rhs[0] = 1.0
    matrix = csc_matrix((vals, (rows, cols)), shape=(K + 1, K + 1))
    return TruncatedSystem(matrix=matrix, rhs=rhs, k=K)


@dataclass(frozen=True)
class NuSolution:
    """Stationary solve at the final truncation level.

    `nu` is anchored (nu[0] = 1) over states 0..k_trunc, `pi` its
    normalization; `window` is the leading stretch whose stabilization the
    doubling loop certified.  `residual` is the max absolute defect of the
    solved balance rows 1..k_trunc.  The *_change fields report the move at
    the final doubling and serve as the error estimate; `kappa_bound` is
    the rigorous per-equation perturbation bound rate_bound * tail(nu
    majorant) when a majorant was declared.
    """

    nu: np.ndarray
    pi: np.ndarray
    eta: float
    k_trunc: int
    window: int
    residual: float
    nu_change: float
    pi_change: float
    eta_change: float
    kappa_bound: float | None


@dataclass(frozen=True)
class _Solve:
    nu: np.ndarray
    pi: np.ndarray
    eta: float
    residual: float
    k: int


def _solve_once(model: GenericCtmdpModel, u: Policy, K: int) -> _Solve:
    system = build_truncated_system(model, u, K)
    nu = system.solve()
    floor = float(nu.min())
    if floor < -NEGATIVE_NU_TOLERANCE:
        raise NonConvergedError(
            f"truncated solve at K={K} produced negative stationary weight "
            f"{floor:.3e}; the truncation has not converged")
    nu = np.clip(nu, 0.0, None)
    defect = system.matrix @ nu - system.rhs
    residual = float(np.max(np.abs(defect[1:]))) if K >= 1 else 0.0
    total = float(nu.sum())
    if total <= 0.0:
        raise SingularTruncationError(f"zero total mass at K={K}")
    pi = nu / total
    eta = float(sum(pi[i] * model.cost(i, u.action(i)) for i in range(K + 1)))
    return _Solve(nu=nu, pi=pi, eta=eta, residual=residual, k=K)


def solve_nu(model: GenericCtmdpModel, u: Policy, tol: float,
             k_start: int | None = None, k_cap: int = DEFAULT_K_CAP) -> NuSolution:
    """Solve the anchored system with K-doubling until the leading window
    stabilizes below tol (see module docstring for the stop rule)."""
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    u = bound_to(model, u)
    K = k_start if k_start is not None else max(2 * model.band, 16)
    if K < model.band:
        raise ValueError(f"starting K={K} must be >= band {model.band}")
    prev = _solve_once(model, u, K)
    while True:
        K2 = 2 * prev.k
        if K2 > k_cap:
            raise KCapExceededError(
                f"truncation failed to stabilize below tol={tol} at K={prev.k} "
                f"(cap {k_cap}); total mass may diverge or converge too slowly "
                "for this policy")
        cur = _solve_once(model, u, K2)
        window = prev.k // 2
        nu_change = float(np.max(np.abs(prev.nu[:window] - cur.nu[:window])))
        pi_change = float(np.max(np.abs(prev.pi[:window] - cur.pi[:window])))
        eta_change = abs(prev.eta - cur.eta)
        if (nu_change < tol and pi_change < tol
                and eta_change <= tol * (1.0 + abs(cur.eta))):
            kappa = None
            if model.majorant is not None:
                c, gamma = model.majorant
                tail_nu = c * gamma ** (cur.k + 1) / (1.0 - gamma) if gamma else 0.0
                kappa = model.rate_bound * tail_nu
            return NuSolution(nu=cur.nu, pi=cur.pi, eta=cur.eta, k_trunc=cur.k,
                              window=window, residual=cur.residual,
                              nu_change=nu_change, pi_change=pi_change,
                              eta_change=eta_change, kappa_bound=kappa)
        prev = cur


def average_cost_generic(model: GenericCtmdpModel, u: Policy, tol: float) -> Bounded:
    """eta(u) = sum_i pi(i) f(i, u(i)) over the stabilized truncation.

    The error estimate combines the last-doubling change with, when the
    model declares both a nu majorant and polynomial cost growth, a
    certified remainder for the mass beyond the truncation.
    """
    solution = solve_nu(model, u, tol)
    estimate = solution.eta_change
    if model.majorant is not None and model.cost_majorant_coeffs is not None:
        c, gamma = model.majorant
        K = solution.k_trunc
        if gamma > 0.0:
            tail = c * gamma ** K * certified_tail_sum(
                gamma, K, model.cost_majorant_coeffs)
            estimate += tail / float(solution.nu.sum())
    return Bounded(value=solution.eta, bound=estimate)


def ctmdp_from_queue(queue_model) -> GenericCtmdpModel:
    """Birth-death generator induced by a group-server queue.

    Transitions are n -> n+1 at the arrival rate and n -> n-1 at the
    aggregate service rate of the action; the cost accessor is the queue's
    holding-plus-operating rate.  When the busy floor guarantees a worst
    feasible ratio gamma = lambda / mu_1 < 1, that uniform geometric
    majorant is attached so generic solves carry rigorous kappa bounds.
    """
    from .queueing import GroupServerModel, service_rate

    qm: GroupServerModel = queue_model
    lam = qm.arrival_rate

    def actions(i: int) -> Sequence[Action]:
        return qm.action_set(i)

    def rate(i: int, a: Action, j: int) -> float:
        if j == i + 1:
            return lam
        if i >= 1 and j == i - 1:
            return service_rate(qm, a)
        if j == i:
            return -(lam + (service_rate(qm, a) if i >= 1 else 0.0))
        return 0.0

    def cost(i: int, a: Action) -> float:
        return qm.cost_rate(i, a)

    majorant = None
    if qm.require_busy_floor:
        slowest_busy = qm.groups[0].rate  # groups sorted by rate, floor keeps one on
        if lam < slowest_busy:
            majorant = (1.0, lam / slowest_busy)
    habs = qm.holding.majorant_coeffs
    cost_coeffs = (habs[0] + qm.max_operating_cost,) + habs[1:] if habs \
        else (qm.max_operating_cost,)
    return GenericCtmdpModel(
        action_sets=actions,
        rate=rate,
        cost=cost,
        rate_bound=lam + qm.max_service_rate,
        band=1,
        forward_band=1,
        majorant=majorant,
        cost_majorant_coeffs=cost_coeffs,
        all_on_action=qm.all_on_action,
        action_space_constant_from=1,
    )


def scaled_model(model: GenericCtmdpModel, factor: float) -> GenericCtmdpModel:
    """All rates multiplied by `factor` (> 0); costs untouched.  The
    stationary distribution and average cost are invariant under this."""
    if factor <= 0.0:
        raise ValueError(f"scale factor must be positive, got {factor}")

    def rate(i: int, a: Action, j: int) -> float:
        return factor * model.rate(i, a, j)

    majorant = model.majorant  # nu scale-invariant: c nu solves the scaled system
    return GenericCtmdpModel(
        action_sets=model.action_sets,
        rate=rate,
        cost=model.cost,
        rate_bound=factor * model.rate_bound,
        band=model.band,
        forward_band=model.forward_band,
        majorant=majorant,
        cost_majorant_coeffs=model.cost_majorant_coeffs,
        all_on_action=model.all_on_action,
        action_space_constant_from=model.action_space_constant_from,
    )
