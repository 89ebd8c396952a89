"""Discrete-event simulation of the group-server queue.

An independent stochastic oracle for the analytic engines: the controlled
chain is simulated as competing exponentials (arrivals at rate lambda,
departures at the aggregate on-rate of the current action), the running
cost is integrated along the path, and the post-warmup time average is
reported with a batch-means 95% confidence interval.  Per-server tokens
are unnecessary: the queue-length marginal only sees the aggregate rate.

Everything is driven by one seeded generator consuming uniforms in a fixed
order, so a fixed seed reproduces the estimate bit for bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .common import UnstablePolicyError
from .policies import Policy, bound_to
from .queueing import GroupServerModel, service_rate, stability_certificate


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    warmup: float
    seed: int
    batches: int = 20

    def __post_init__(self):
        if not self.horizon > self.warmup > 0.0:
            raise ValueError(
                f"need horizon > warmup > 0, got horizon={self.horizon} "
                f"warmup={self.warmup}")
        if self.batches < 2:
            raise ValueError(f"need at least 2 batches, got {self.batches}")


@dataclass(frozen=True)
class SimEstimate:
    """Time-average estimate with its batch-means confidence interval,
    plus the same for the fraction of time spent empty."""

    eta_hat: float
    ci_lo: float
    ci_hi: float
    batch_means: tuple[float, ...]
    p0_hat: float
    p0_lo: float
    p0_hi: float
    events: int
    config: SimConfig


class _Uniforms:
    """Chunked uniform stream; one pass through a seeded generator."""

    def __init__(self, rng: np.random.Generator, chunk: int = 1 << 14):
        self._rng = rng
        self._chunk = chunk
        self._buf = rng.random(chunk)
        self._idx = 0

    def next(self) -> float:
        if self._idx == self._chunk:
            self._buf = self._rng.random(self._chunk)
            self._idx = 0
        value = self._buf[self._idx]
        self._idx += 1
        return value


def _ci(samples: np.ndarray) -> tuple[float, float, float]:
    mean = float(samples.mean())
    if len(samples) < 2 or float(samples.std(ddof=1)) == 0.0:
        return mean, mean, mean
    half = float(student_t.ppf(0.975, len(samples) - 1)
                 * samples.std(ddof=1) / math.sqrt(len(samples)))
    return mean, mean - half, mean + half


def simulate_eta(model: GroupServerModel, u: Policy, cfg: SimConfig) -> SimEstimate:
    """Estimate eta(u) by integrating f(n(t), u(n(t))) along one simulated
    path; warns (and proceeds) when no stability certificate exists --
    divergence then shows up in the estimate itself."""
    u = bound_to(model, u)
    try:
        stability_certificate(model, u)
    except UnstablePolicyError as exc:
        warnings.warn(f"simulating an uncertified policy: {exc}", stacklevel=2)

    lam = model.arrival_rate
    width = (cfg.horizon - cfg.warmup) / cfg.batches
    f_time = np.zeros(cfg.batches)
    empty_time = np.zeros(cfg.batches)

    rates: dict[int, float] = {}
    costs: dict[int, float] = {}

    def state_rate(n: int) -> float:
        if n not in rates:
            rates[n] = service_rate(model, u.action(n)) if n >= 1 else 0.0
        return rates[n]

    def state_cost(n: int) -> float:
        if n not in costs:
            costs[n] = model.cost_rate(n, u.action(n))
        return costs[n]

    def deposit(n: int, a: float, b: float) -> None:
        a = max(a, cfg.warmup)
        if b <= a:
            return
        f = state_cost(n)
        lo = min(int((a - cfg.warmup) / width), cfg.batches - 1)
        hi = min(int((b - cfg.warmup) / width), cfg.batches - 1)
        for batch in range(lo, hi + 1):
            left = max(a, cfg.warmup + batch * width)
            right = min(b, cfg.warmup + (batch + 1) * width)
            span = right - left
            if span <= 0.0:
                continue
            f_time[batch] += f * span
            if n == 0:
                empty_time[batch] += span

    uniforms = _Uniforms(np.random.default_rng(cfg.seed))
    t = 0.0
    n = 0
    events = 0
    while t < cfg.horizon:
        total = lam + state_rate(n)
        if total == 0.0:
            deposit(n, t, cfg.horizon)
            t = cfg.horizon
            break
        dt = -math.log(uniforms.next()) / total
        deposit(n, t, min(t + dt, cfg.horizon))
        t += dt
        if t >= cfg.horizon:
            break
        events += 1
        if uniforms.next() * total < lam:
            n += 1
        else:
            n -= 1

    eta_hat, eta_lo, eta_hi = _ci(f_time / width)
    p0_hat, p0_lo, p0_hi = _ci(empty_time / width)
    return SimEstimate(eta_hat=eta_hat, ci_lo=eta_lo, ci_hi=eta_hi,
                       batch_means=tuple(f_time / width),
                       p0_hat=p0_hat, p0_lo=p0_lo, p0_hi=p0_hi,
                       events=events, config=cfg)
