"""Adaptive Simpson integration for piecewise-smooth integrands.

The integrands in this toolkit (Laplace densities and products of Laplace
CDFs) are smooth except at a known, finite set of kink points.  Callers
split the domain at those kinks and integrate each smooth segment with
adaptive Simpson refinement.

Segments where the integrand sits at the floating-point noise floor (for
example, the clipped difference of two densities that agree exactly) can
never satisfy a tight relative tolerance; an evaluation budget bounds the
work there and the returned estimate is then noise-level small, which is
all the callers need.
"""

from __future__ import annotations

from typing import Callable, Sequence

_MAX_DEPTH = 50
_TOL_FLOOR = 1e-300
_DEFAULT_MAX_EVALS = 200_000


def _simpson(a, fa, b, fb, fm) -> float:
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n: int):
        self.left = n

    def take(self, k: int) -> bool:
        self.left -= k
        return self.left >= 0


def _adaptive(f, a, fa, b, fb, m, fm, whole, tol, depth, budget: _Budget) -> float:
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    if not budget.take(2):
        return whole
    flm = f(lm)
    frm = f(rm)
    left = _simpson(a, fa, m, fm, flm)
    right = _simpson(m, fm, b, fb, frm)
    delta = left + right - whole
    if depth >= _MAX_DEPTH or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    half = 0.5 * tol
    return _adaptive(f, a, fa, m, fm, lm, flm, left, half, depth + 1, budget) + _adaptive(
        f, m, fm, b, fb, rm, frm, right, half, depth + 1, budget
    )


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float,
    max_evals: int = _DEFAULT_MAX_EVALS,
) -> float:
    """Integrate f over [a, b] to absolute accuracy roughly ``tol``."""
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(a, fa, b, fb, fm)
    return _adaptive(f, a, fa, b, fb, m, fm, whole, max(tol, _TOL_FLOOR), 0, _Budget(max_evals))


def integrate_piecewise(
    f: Callable[[float], float],
    breakpoints: Sequence[float],
    abs_tol: float,
    rel_tol: float | None = None,
) -> float:
    """Integrate over consecutive [breakpoints[i], breakpoints[i+1]] segments.

    With ``rel_tol`` unset each segment gets an equal share of ``abs_tol``.
    With ``rel_tol`` set, a coarse pass first sizes the whole integral and
    every segment is then refined to the tighter of its absolute share and
    ``rel_tol`` relative to that total, so small totals stay accurate in
    ratio.  Only use the relative mode for smooth nonnegative integrands;
    integrands clipped at zero sit at the floating-point noise floor where
    a relative target can never be met.
    """
    points = sorted(set(float(x) for x in breakpoints))
    if len(points) < 2:
        return 0.0
    segments = list(zip(points[:-1], points[1:]))
    nseg = len(segments)
    if rel_tol is None:
        return sum(adaptive_simpson(f, a, b, abs_tol / nseg) for a, b in segments)
    scale = sum(abs(adaptive_simpson(f, a, b, max(abs_tol, 1e-9), max_evals=2000)) for a, b in segments)
    tol_seg = min(abs_tol / nseg, max(rel_tol * scale / nseg, _TOL_FLOOR))
    return sum(adaptive_simpson(f, a, b, tol_seg) for a, b in segments)
