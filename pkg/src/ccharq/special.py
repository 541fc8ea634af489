"""First-order Marcum-Q function, exact series and high-SNR approximation.

The exact path uses the Poisson representation of the double series

    Q1(a, b) = P(X >= Y),   X ~ Poisson(a**2 / 2),   Y ~ Poisson(b**2 / 2)

so that both ``Q1`` and its complement ``1 - Q1`` are sums of positive terms.
Whichever of the two is smaller is summed directly, which keeps full relative
precision for outage probabilities far below machine epsilon of 1.
"""

from __future__ import annotations

import math

DEFAULT_REL_TOL = 1e-12
MAX_TERMS = 10_000
# consecutive negligible terms required before the series is truncated
_QUIET_TERMS = 3


class ConvergenceError(ArithmeticError):
    """A series failed to converge within :data:`MAX_TERMS` terms."""

    def __init__(self, a: float, b: float, terms: int):
        super().__init__(f"Marcum-Q series did not converge for a={a!r}, b={b!r} after {terms} terms")
        self.a = a
        self.b = b
        self.terms = terms


def _check_args(a: float, b: float) -> None:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"Marcum-Q arguments must be finite, got a={a!r}, b={b!r}")
    if a < 0 or b < 0:
        raise ValueError(f"Marcum-Q arguments must be non-negative, got a={a!r}, b={b!r}")


def _check_tol(rel_tol: float) -> None:
    if not 0 < rel_tol < 1e-3:
        raise ValueError(f"rel_tol must lie in (0, 1e-3), got {rel_tol!r}")


def _logaddexp(x: float, y: float) -> float:
    if x == -math.inf:
        return y
    if y == -math.inf:
        return x
    hi, lo = (x, y) if x > y else (y, x)
    return hi + math.log1p(math.exp(lo - hi))


def _log_poisson(n: int, lam: float, log_lam: float) -> float:
    return n * log_lam - lam - math.lgamma(n + 1)


def _mixed_poisson_sum(outer: float, inner: float, shift: int, rel_tol: float, a: float, b: float) -> float:
    """Return ``sum_{n >= shift} P(U = n) * P(V <= n - shift)`` in log space.

    ``U ~ Poisson(outer)`` and ``V ~ Poisson(inner)``, both rates strictly
    positive. The inner CDF is accumulated forward, so every operation adds
    positive quantities. The summand is log-concave in ``n`` and therefore
    unimodal; truncation happens on its decreasing flank once
    ``_QUIET_TERMS`` consecutive terms fall below ``rel_tol`` times the
    partial sum.
    """
    log_outer = math.log(outer)
    log_inner = math.log(inner)
    log_head = -math.inf  # log P(V <= n - shift)
    log_total = -math.inf
    log_tol = math.log(rel_tol)
    prev = -math.inf
    quiet = 0
    for n in range(shift, shift + MAX_TERMS):
        log_head = _logaddexp(log_head, _log_poisson(n - shift, inner, log_inner))
        term = _log_poisson(n, outer, log_outer) + log_head
        log_total = _logaddexp(log_total, term)
        if n > outer and term < prev and term < log_tol + log_total:
            quiet += 1
            if quiet >= _QUIET_TERMS:
                return math.exp(log_total)
        else:
            quiet = 0
        prev = term
    raise ConvergenceError(a, b, MAX_TERMS)


def _q1_pair(a: float, b: float, rel_tol: float) -> tuple[float, float]:
    """Return ``(Q1(a, b), 1 - Q1(a, b))`` with the smaller one summed directly."""
    x = 0.5 * a * a
    y = 0.5 * b * b
    if y == 0.0:
        return 1.0, 0.0
    if x == 0.0:
        return math.exp(-y), -math.expm1(-y)
    if y < x + 1.0:
        # complement is the small side: P(Y > X) = sum_m P(Y = m) P(X <= m - 1)
        cdf = _mixed_poisson_sum(y, x, 1, rel_tol, a, b)
        cdf = min(max(cdf, 0.0), 1.0)
        return 1.0 - cdf, cdf
    q1 = _mixed_poisson_sum(x, y, 0, rel_tol, a, b)
    q1 = min(max(q1, 0.0), 1.0)
    return q1, 1.0 - q1


def marcum_q1_exact(a: float, b: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """First-order Marcum-Q function ``Q1(a, b)``.

    Args:
        a: non-centrality (LOS shape) parameter, ``a >= 0``.
        b: threshold parameter, ``b >= 0``.
        rel_tol: relative truncation tolerance of the series, in ``(0, 1e-3)``.

    Returns:
        ``Q1(a, b)`` clamped to ``[0, 1]``.

    Raises:
        ConvergenceError: the series needed more than :data:`MAX_TERMS` terms.
    """
    _check_args(a, b)
    _check_tol(rel_tol)
    return _q1_pair(a, b, rel_tol)[0]


def marcum_q1_complement(a: float, b: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``1 - Q1(a, b)``, i.e. the Rician power CDF, without cancellation."""
    _check_args(a, b)
    _check_tol(rel_tol)
    return _q1_pair(a, b, rel_tol)[1]


def marcum_q1_approx(a: float, b: float) -> float:
    """High-SNR approximation ``1 - (b**2 / 2) * exp(-a**2 / 2)``.

    Not clamped: the result goes negative once ``b`` is large.
    """
    _check_args(a, b)
    return 1.0 - 0.5 * b * b * math.exp(-0.5 * a * a)
