"""Analytical dam-break solutions for flat-bottom shallow water.

Dry bed (``hR = 0``): a single rarefaction fan from the dam to the dry front.
Wet bed (``hR > 0``): left rarefaction, constant middle state, right shock.
The middle state comes from a scalar equation in the shock speed ``s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IterationError, ValidationError


@dataclass(frozen=True)
class RiemannSolution:
    hL: float
    hR: float
    g: float
    h_m: float
    u_m: float
    s: float
    residual: float = 0.0
    iterations: int = 0

    @property
    def c(self) -> float:
        return math.sqrt(self.g * self.hL)

    @property
    def c_m(self) -> float:
        return math.sqrt(self.g * self.h_m)

    def positions(self, t, x_dam):
        """Rarefaction tail, rarefaction head and shock position at time ``t``."""
        x1 = x_dam - self.c * t
        x2 = x_dam + (self.u_m - self.c_m) * t
        x3 = x_dam + self.s * t
        return x1, x2, x3


def _middle_from_speed(s, hL, hR, g):
    """``(u_m, h_m, residual)`` for a trial shock speed ``s``."""
    a = g * hR
    r = math.sqrt(1.0 + 8.0 * s * s / a)
    h_m = 0.5 * hR * (r - 1.0)
    u_m = s - a / (4.0 * s) * (r + 1.0)
    res = u_m + 2.0 * math.sqrt(g * h_m) - 2.0 * math.sqrt(g * hL)
    return u_m, h_m, res


def _residual_derivative(s, hR, g):
    a = g * hR
    r = math.sqrt(1.0 + 8.0 * s * s / a)
    h_m = 0.5 * hR * (r - 1.0)
    dr = 8.0 * s / (a * r)
    du = 1.0 + a * (r + 1.0) / (4.0 * s * s) - a / (4.0 * s) * dr
    dh = 0.5 * hR * dr
    return du + g * dh / math.sqrt(g * h_m)


def solve_middle_state(hL, hR, g=9.81, tol=1e-13, max_iter=50) -> RiemannSolution:
    """Middle depth, velocity and shock speed of the wet-bed dam break.

    Newton's method on the shock speed, started at ``sqrt(g hL)``. If Newton
    has not reached ``tol`` after ``max_iter`` steps, bisection on
    ``[sqrt(g hR), 4 sqrt(g hL)]`` takes over.
    """
    hL = float(hL)
    hR = float(hR)
    if hR == 0.0:
        raise ValidationError("hR = 0 is the dry-bed case; use dry_bed_solution")
    if not (hL > hR > 0.0):
        raise ValidationError(f"need hL > hR > 0, got hL={hL}, hR={hR}")

    c = math.sqrt(g * hL)
    s = c
    res = _middle_from_speed(s, hL, hR, g)[2]
    it = 0
    while abs(res) > tol and it < max_iter:
        ds = res / _residual_derivative(s, hR, g)
        s_new = s - ds
        if not s_new > 0:
            s_new = 0.5 * s
        s = s_new
        res = _middle_from_speed(s, hL, hR, g)[2]
        it += 1

    if not abs(res) <= tol:
        s, res, extra = _bisect_speed(hL, hR, g, tol)
        it += extra
        if not abs(res) <= tol:
            raise IterationError(
                f"middle state did not converge for hL={hL}, hR={hR}: |residual|={abs(res):.3e}",
                residual=res,
            )
    u_m, h_m, res = _middle_from_speed(s, hL, hR, g)
    return RiemannSolution(hL=hL, hR=hR, g=g, h_m=h_m, u_m=u_m, s=s, residual=res, iterations=it)


def _bisect_speed(hL, hR, g, tol):
    lo, hi = math.sqrt(g * hR), 4.0 * math.sqrt(g * hL)
    f_lo = _middle_from_speed(lo, hL, hR, g)[2]
    best_s, best_r = lo, f_lo
    n = 0
    while n < 200:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = _middle_from_speed(mid, hL, hR, g)[2]
        n += 1
        if abs(f_mid) < abs(best_r):
            best_s, best_r = mid, f_mid
        if abs(f_mid) <= tol:
            break
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return best_s, best_r, n


def _rarefaction(delta, c, g):
    u = 2.0 / 3.0 * (c + delta)
    h = 4.0 / (9.0 * g) * (c - 0.5 * delta) ** 2
    return u, h


def dry_bed_solution(x, t, hL, g=9.81, x_dam=50.0):
    """Velocity and depth ``(u, h)`` of the dry-bed dam break at positions ``x``.

    ``t = 0`` returns the initial step; negative times are rejected.
    """
    x = np.asarray(x, dtype=float)
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if not hL > 0:
        raise ValidationError(f"hL must be positive, got {hL}")
    if t == 0:
        h = np.where(x < x_dam, float(hL), 0.0)
        return np.zeros_like(h), h
    c = math.sqrt(g * hL)
    x_l = x_dam - c * t
    x_r = x_dam + 2.0 * c * t
    delta = (x - x_dam) / t
    uf, hf = _rarefaction(delta, c, g)
    u = np.where(x < x_l, 0.0, np.where(x <= x_r, uf, 0.0))
    h = np.where(x < x_l, float(hL), np.where(x <= x_r, hf, 0.0))
    return u, h


def wet_bed_solution(x, t, mu, g=9.81, x_dam=50.0, solution=None):
    """Velocity and depth ``(u, h)`` of the wet-bed dam break at positions ``x``.

    ``mu`` is ``(hL, hR)`` with ``hR > 0``. A precomputed middle state can be
    passed as ``solution``.
    """
    hL, hR = (float(v) for v in (mu.as_tuple() if hasattr(mu, "as_tuple") else mu))
    x = np.asarray(x, dtype=float)
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    if not hR > 0:
        raise ValidationError("wet_bed_solution needs hR > 0")
    if t == 0:
        h = np.where(x < x_dam, hL, hR)
        return np.zeros_like(h), h
    sol = solution if solution is not None else solve_middle_state(hL, hR, g)
    x1, x2, x3 = sol.positions(t, x_dam)
    c = sol.c
    delta = (x - x_dam) / t
    uf, hf = _rarefaction(delta, c, g)
    u = np.select([x <= x1, x < x2, x <= x3], [0.0, uf, sol.u_m], default=0.0)
    h = np.select([x <= x1, x < x2, x <= x3], [hL, hf, sol.h_m], default=hR)
    return u, h


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of ``log|y|`` against ``log x``.

    Zero ``y`` values are floored at 1e-300 so a vanishing sequence fits a
    flat line.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.maximum(np.abs(np.asarray(y, dtype=float)), 1e-300))
    return float(np.polyfit(lx, ly, 1)[0])


def sensitivity_slope(hL, g=9.81, hR_samples=None, quantity=None, differentiate=True):
    """Log-log slope of the middle-depth sensitivity ``dh_m/dhR`` as ``hR -> 0``.

    Parameters
    ----------
    hL : float
        Upstream depth.
    hR_samples : array_like, optional
        Positive downstream depths spanning at least two decades, all below
        ``hL / 10``. Defaults to 13 log-spaced points in ``[1e-6, 1e-2]``.
    quantity : callable, optional
        ``hR -> value``; defaults to the middle depth ``h_m(hR)``.
    differentiate : bool
        If False, fit the quantity itself instead of its derivative.

    Returns
    -------
    float
        Expected near -1/2 for the derivative and +1/2 for ``h_m`` itself.
    """
    if hR_samples is None:
        hR_samples = np.logspace(-6, -2, 13)
    hr = np.sort(np.asarray(hR_samples, dtype=float))[::-1]
    if hr.size < 4:
        raise ValidationError("need at least 4 hR samples")
    if np.any(hr <= 0) or np.any(hr >= hL / 10.0):
        raise ValidationError("hR samples must lie in (0, hL/10)")
    if np.log10(hr.max() / hr.min()) < 2.0 - 1e-12:
        raise ValidationError("hR samples must span at least two decades")
    if quantity is None:
        def quantity(v):
            return solve_middle_state(hL, v, g).h_m

    if not differentiate:
        vals = np.array([quantity(v) for v in hr])
        return fit_loglog_slope(hr, vals)
    rel = 1e-4
    deriv = np.array(
        [(quantity(v * (1 + rel)) - quantity(v * (1 - rel))) / (2 * rel * v) for v in hr]
    )
    return fit_loglog_slope(hr, deriv)
