"""Adaptive Simpson quadrature tuned for the integrands this package builds.

The gradient integrands assembled by the action-density construction are
smooth except possibly at p = 0, where degenerate weights like |p|**k with
k <= -1 blow up.  The integrator therefore splits any range that straddles
zero and never samples an endpoint where the integrand is non-finite: it
steps a tiny distance inside the range instead, which drops a sliver of
negligible measure whenever the integrand has a finite one-sided limit and
escalates to an error when the integral genuinely diverges.

A range with one edge many decades closer to zero than the other (as happens
when a gradient sampled at a critical point of u lands at p ~ 1e-15 and the
convexity weight is integrated from there up to an O(1) base point) cannot
be resolved by bisection of a linear grid within any reasonable depth.  Such
ranges are integrated under the substitution s = exp(t), which maps the
scale separation to an O(log) interval where the integrand varies tamely.
"""

import math

__all__ = ["QuadratureError", "adaptive_simpson"]

# 2**_MAX_DEPTH panels is the subdivision budget.
_MAX_DEPTH = 20
_ENDPOINT_NUDGES = (1e-12, 1e-9, 1e-7)
# One-sided ranges whose near-zero edge is this much smaller than the far
# edge switch to log-space integration.
_LOG_EDGE_RATIO = 1e-4


class QuadratureError(RuntimeError):
    """Adaptive refinement failed; the message names the offending abscissa."""


def _probe_endpoint(f, x, toward, span):
    # Retreat toward the interior if the endpoint value is non-finite.
    y = f(x)
    if math.isfinite(y):
        return x, y
    direction = 1.0 if toward > x else -1.0
    for rel in _ENDPOINT_NUDGES:
        xn = x + direction * rel * span
        y = f(xn)
        if math.isfinite(y):
            return xn, y
    raise QuadratureError(f"integrand is non-finite near x = {x!r}")


def _interior(f, x):
    y = f(x)
    if not math.isfinite(y):
        raise QuadratureError(f"integrand is non-finite at interior point x = {x!r}")
    return y


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def _log_space(f, a, b, tol):
    # s = exp(t) carries ds = s dt, so the transformed integrand is f(s) * s.
    def transformed(t):
        s = math.exp(t)
        return f(s) * s

    return adaptive_simpson(transformed, math.log(a), math.log(b), tol, False)


def _tail_slope(f, x1):
    # Local power-law exponent d log|f| / d log s just inside a nudged
    # endpoint; None when the probe pair cannot support an estimate.
    y1 = abs(f(x1))
    y2 = abs(f(10.0 * x1))
    if not (math.isfinite(y1) and math.isfinite(y2)) or y1 == 0.0 or y2 == 0.0:
        return None
    return (math.log(y2) - math.log(y1)) / math.log(10.0)


def _refine(f, a, fa, m, fm, b, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = _interior(f, lm)
    frm = _interior(f, rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    if depth >= _MAX_DEPTH:
        raise QuadratureError(
            f"no convergence after {_MAX_DEPTH} subdivision levels near x = {m!r}"
        )
    return _refine(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1) + _refine(
        f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1
    )


def adaptive_simpson(f, a, b, tol=1e-9, split_at_zero=True):
    """Integrate ``f`` over ``[a, b]``.

    ``tol`` acts as a combined absolute and relative tolerance: the accepted
    error is ``tol * (1 + |first estimate|)``.  With ``split_at_zero`` the
    range is cut at 0 whenever 0 lies strictly inside, so one-sided endpoint
    handling applies on each half.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, split_at_zero)
    if split_at_zero and a < 0.0 < b:
        return adaptive_simpson(f, a, 0.0, 0.5 * tol, False) + adaptive_simpson(
            f, 0.0, b, 0.5 * tol, False
        )
    if 0.0 < a < _LOG_EDGE_RATIO * b:
        return _log_space(f, a, b, tol)
    if b <= 0.0 and 0.0 < -b < _LOG_EDGE_RATIO * -a:
        return _log_space(lambda s: f(-s), -b, -a, tol)
    span = b - a
    xa, fa = _probe_endpoint(f, a, b, span)
    xb, fb = _probe_endpoint(f, b, a, span)
    # A nudge off a singular endpoint at 0 can expose the same scale
    # separation the pre-dispatch looks for; re-check on the nudged range.
    # Tails at or steeper than 1/s make the dropped sliver divergent, so
    # those still escalate instead of being integrated from the nudge on.
    if xa != a and 0.0 < xa < _LOG_EDGE_RATIO * xb:
        slope = _tail_slope(f, xa)
        if slope is not None and slope <= -0.999:
            raise QuadratureError(f"integral diverges at the endpoint x = {a!r}")
        return _log_space(f, xa, xb, tol)
    if xb != b and xb < 0.0 and 0.0 < -xb < _LOG_EDGE_RATIO * -xa:
        slope = _tail_slope(lambda s: f(-s), -xb)
        if slope is not None and slope <= -0.999:
            raise QuadratureError(f"integral diverges at the endpoint x = {b!r}")
        return _log_space(lambda s: f(-s), -xb, -xa, tol)
    m = 0.5 * (xa + xb)
    fm = _interior(f, m)
    whole = _simpson(fa, fm, fb, xb - xa)
    tol_abs = tol * (1.0 + abs(whole))
    return _refine(f, xa, fa, m, fm, xb, fb, whole, tol_abs, 0)
