"""
Bracketed scalar root finding shared by the equilibrium solvers.

Brackets grow by doubling until the sign changes, then scipy's brentq
(bisection / secant / inverse quadratic) polishes the root.
"""

import math

from scipy.optimize import brentq

from config.exceptions import SolverError

XTOL = 1e-13
RTOL = 1e-13
MAX_ITER = 200
MAX_DOUBLINGS = 60


def _evaluate(func, x, label):
    value = func(x)
    if not math.isfinite(value):
        raise SolverError(f"{label}: non-finite function value", x=x, value=value)
    return value


def expand_bracket(func, lo, hi, *, increasing=True, label="root"):
    """
    Grow [lo, hi] towards the root of a monotone func until it brackets a sign change.

    Returns (lo, hi). The search moves in the direction implied by the
    monotonicity, doubling the step each time.
    """
    if hi <= lo:
        raise SolverError(f"{label}: empty initial bracket", lo=lo, hi=hi)

    sign = 1.0 if increasing else -1.0
    f_lo = sign * _evaluate(func, lo, label)
    f_hi = sign * _evaluate(func, hi, label)
    width = hi - lo

    for _ in range(MAX_DOUBLINGS):
        if f_lo <= 0.0 <= f_hi:
            return lo, hi
        width *= 2.0
        if f_hi < 0.0:
            lo, f_lo = hi, f_hi
            hi = hi + width
            f_hi = sign * _evaluate(func, hi, label)
        else:
            hi, f_hi = lo, f_lo
            lo = lo - width
            f_lo = sign * _evaluate(func, lo, label)

    raise SolverError(
        f"{label}: no sign change found",
        bracket=(lo, hi),
        doublings=MAX_DOUBLINGS,
        f_lo=sign * f_lo,
        f_hi=sign * f_hi,
    )


def solve_monotone(func, lo, hi, *, increasing=True, label="root"):
    """Root of a monotone scalar function, starting from the guess bracket [lo, hi]."""
    lo, hi = expand_bracket(func, lo, hi, increasing=increasing, label=label)
    return solve_bracketed(func, lo, hi, label=label)


def solve_bracketed(func, lo, hi, *, label="root"):
    try:
        root, info = brentq(func, lo, hi, xtol=XTOL, rtol=RTOL, maxiter=MAX_ITER, full_output=True, disp=False)
    except ValueError as exc:
        raise SolverError(f"{label}: {exc}", bracket=(lo, hi)) from exc
    if not info.converged:
        raise SolverError(
            f"{label}: did not converge",
            bracket=(lo, hi),
            iterations=info.iterations,
            flag=info.flag,
        )
    return root
