"""Certified tail sums for geometric-times-polynomial series.

The truncation machinery repeatedly needs an upper bound on

    sum_{m>=1} rho^m * (p(start + m) + const),    0 <= rho < 1,

where p is a polynomial with nonnegative coefficients.  Such sums are
evaluated by direct summation, cut once the remaining terms admit a
geometric majorant that is negligible relative to the accumulated value.
The majorant is added to the result, so the return value always covers
the true sum from above.
"""

from __future__ import annotations

from typing import Sequence


def poly_eval(coeffs: Sequence[float], x: float) -> float:
    """Evaluate a polynomial given ascending coefficients."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def certified_tail_sum(rho: float, start: int, coeffs: Sequence[float] = (),
                       const: float = 0.0, rel_tol: float = 1e-16,
                       max_terms: int = 10_000_000) -> float:
    """Upper bound on sum_{m>=1} rho^m * (p(start+m) + const).

    Requires 0 <= rho < 1, nonnegative `coeffs` (ascending) and `const`.
    For m >= 1 the term ratio is at most rho * ((x+1)/x)**deg at x = start+m,
    which is decreasing in m, so once that ratio drops below 1 the remaining
    tail is bounded by a plain geometric series.
    """
    if rho == 0.0:
        return 0.0
    if not 0.0 < rho < 1.0:
        raise ValueError(f"geometric ratio must lie in [0, 1), got {rho}")
    if const < 0.0 or any(c < 0.0 for c in coeffs):
        raise ValueError("tail majorant requires nonnegative coefficients")
    degree = 0
    for j, c in enumerate(coeffs):
        if c != 0.0:
            degree = j

    acc = 0.0
    power = 1.0
    for m in range(1, max_terms + 1):
        power *= rho
        term = power * (poly_eval(coeffs, start + m) + const)
        acc += term
        x = start + m
        q = rho * ((x + 1.0) / x) ** degree if degree else rho
        if q < 1.0:
            remainder = term * q / (1.0 - q)
            if remainder <= rel_tol * acc + 1e-300:
                return acc + remainder
    raise RuntimeError("series tail failed to certify within the term budget")
