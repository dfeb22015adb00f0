"""Both sides of the Jacobi triple product with certified truncation.

Values are returned together with a bound on ``|ln(full) - ln(truncated)|``;
residuals are compared in the same log units because the sums range over
many orders of magnitude on the test grid.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

from ..logmath import adaptive_gaussian_series, gaussian_series
from ..model import DomainError
from .report import IdentityReport


def _check(X: float, Y: float):
    if not (0.0 < X < 1.0) or Y == 0 or not math.isfinite(Y):
        raise DomainError(f"need 0 < X < 1 and Y != 0, got X={X}, Y={Y}")


def jacobi_lhs_log(X: float, Y: float, terms: int) -> Tuple[float, float]:
    """``ln prod_{i<=terms} (1 - X^{2i})(1 + X^{2i-1} Y^2)(1 + X^{2i-1} / Y^2)`` and its tail."""
    _check(X, Y)
    lx = math.log(X)
    ly2 = 2.0 * math.log(abs(Y))
    parts = []
    for i in range(1, terms + 1):
        parts.append(math.log1p(-math.exp(2 * i * lx)))
        parts.append(math.log1p(math.exp((2 * i - 1) * lx + ly2)))
        parts.append(math.log1p(math.exp((2 * i - 1) * lx - ly2)))
    x2 = X * X
    a = X ** (2 * terms + 2)
    b = X ** (2 * terms + 1) * (Y * Y + 1.0 / (Y * Y))
    # |ln(1 - u)| <= u / (1 - u) and ln(1 + u) <= u, summed geometrically in i
    tail = a / ((1.0 - a) * (1.0 - x2)) + b / (1.0 - x2)
    return math.fsum(parts), tail


def jacobi_lhs(X: float, Y: float, terms: int = 60) -> Tuple[float, float]:
    """Truncated product and the relative (log-unit) bound on the dropped factors."""
    v, t = jacobi_lhs_log(X, Y, terms)
    return math.exp(v), t


def jacobi_rhs_log(X: float, Y: float, j_max: Optional[int] = None,
                   target: float = 1e-17) -> Tuple[float, float, int]:
    """``ln sum_{|j|<=j_max} X^{j^2} Y^{2j}``, its tail and the ``j_max`` used.

    With ``j_max=None`` the range grows until the tail is below ``target``.
    """
    _check(X, Y)
    a, b = math.log(X), 2.0 * math.log(abs(Y))
    if j_max is None:
        return adaptive_gaussian_series(a, b, target)
    v, t = gaussian_series(a, b, j_max)
    return v, t, j_max


def jacobi_rhs(X: float, Y: float, j_max: int = 12) -> Tuple[float, float]:
    v, t, _ = jacobi_rhs_log(X, Y, j_max)
    return math.exp(v), t


def lhs_terms_for(X: float, Y: float, target: float = 1e-17) -> int:
    """Smallest number of factors whose tail bound is below ``target``."""
    _check(X, Y)
    t = 8
    while jacobi_lhs_log(X, Y, t)[1] >= target:
        t *= 2
    lo, hi = t // 2, t
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if jacobi_lhs_log(X, Y, mid)[1] < target:
            hi = mid
        else:
            lo = mid
    return hi


def check_jacobi(X: float, Y: float, terms: Optional[int] = None, j_max: Optional[int] = None,
                 eps: float = 1e-10) -> IdentityReport:
    """``|ln lhs - ln rhs|`` against the two tails plus ``eps``."""
    if terms is None:
        terms = lhs_terms_for(X, Y)
    lv, lt = jacobi_lhs_log(X, Y, terms)
    rv, rt, jm = jacobi_rhs_log(X, Y, j_max)
    return IdentityReport(
        "jacobi", {"X": X, "Y": Y, "terms": terms, "j_max": jm}, abs(lv - rv), lt + rt, eps,
        {"lhs": math.exp(lv), "rhs": math.exp(rv), "log_lhs": lv, "log_rhs": rv,
         "lhs_tail": lt, "rhs_tail": rt})


GRID_X = (0.1, 0.3, 0.5, 0.7, 0.9)
GRID_Y = (0.25, 0.5, 1.0, 2.0, 4.0)


def jacobi_grid(xs=GRID_X, ys=GRID_Y, eps: float = 1e-10):
    return [check_jacobi(x, y, eps=eps) for x in xs for y in ys]
