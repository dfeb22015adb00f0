"""Log-domain arithmetic with compensated summation and certified series tails."""

from __future__ import annotations

import math
from typing import Iterable, Tuple

NEG_INF = -math.inf


def logsumexp(xs: Iterable[float]) -> float:
    xs = [x for x in xs if x != NEG_INF]
    if not xs:
        return NEG_INF
    m = max(xs)
    if math.isinf(m):
        return m
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def log1pexp(x: float) -> float:
    """ln(1 + e^x) without overflow."""
    if x > 35.0:
        return x + math.exp(-x)
    return math.log1p(math.exp(x))


def log1mexp(x: float) -> float:
    """ln(1 - e^x) for x < 0."""
    if x >= 0.0:
        raise ValueError("log1mexp needs x < 0")
    if x > -0.6931471805599453:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def gaussian_series(a: float, b: float, j_max: int) -> Tuple[float, float]:
    """Truncated ``ln sum_{|j| <= j_max} exp(a j^2 + b j)`` for ``a < 0``.

    Returns ``(log_sum, tail)`` where ``tail`` bounds, in log units, the
    distance between the truncated and the full logarithm.  The bound uses
    that consecutive term ratios ``exp(a(2j+1) + b)`` decrease in ``j``; it
    is ``inf`` when ``j_max`` is too small for that ratio to drop below one.
    """
    if a >= 0:
        raise ValueError("series diverges unless a < 0")
    log_sum = logsumexp(a * j * j + b * j for j in range(-j_max, j_max + 1))
    tail = 0.0
    for slope in (b, -b):
        log_rho = a * (2 * j_max + 3) + slope
        if log_rho >= 0:
            return log_sum, math.inf
        log_first = a * (j_max + 1) ** 2 + slope * (j_max + 1)
        tail += math.exp(log_first - log_sum - log1mexp(log_rho))
    return log_sum, tail


def adaptive_gaussian_series(a: float, b: float, target: float = 1e-17,
                             j_start: int = 4, j_limit: int = 100_000):
    """:func:`gaussian_series` with ``j_max`` grown until the tail is below ``target``.

    Returns ``(log_sum, tail, j_max)``.
    """
    j = j_start
    while True:
        log_sum, tail = gaussian_series(a, b, j)
        if tail < target:
            return log_sum, tail, j
        if j >= j_limit:
            raise ArithmeticError(f"series tail {tail:g} not certified below {target:g}")
        j = min(2 * j, j_limit)
