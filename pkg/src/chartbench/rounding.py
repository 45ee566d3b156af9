"""Rounding helpers shared by the scoring and reporting code.

All reported percentages round half away from zero (the convention behind
the published tables), never banker's rounding. Ratios of integer counts
go through exact integer arithmetic so boundary cases cannot drift with
float noise.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal


def ratio_percent(numerator: int, denominator: int, decimals: int = 1) -> float:
    """100 * numerator / denominator, rounded half away from zero.

    Exact: computed with integer arithmetic, so e.g. 138/390 -> 35.4 is a
    statement about integers, not about float rounding.
    """
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    if numerator < 0:
        raise ValueError("numerator must be non-negative")
    scale = 10**decimals
    q, r = divmod(100 * scale * numerator, denominator)
    if 2 * r >= denominator:
        q += 1
    return q / scale


def ratio_mean(total: int, count: int, decimals: int = 2) -> float:
    """total / count for integer sums, rounded half away from zero, exact."""
    if count <= 0:
        raise ValueError("count must be positive")
    scale = 10**decimals
    q, r = divmod(total * scale, count)
    if 2 * r >= count:
        q += 1
    return q / scale


def round_half_away(value: float, decimals: int) -> float:
    """Round a float half away from zero at `decimals` places."""
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))
