"""Relative space-time error norms and their aggregates over parameter sets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


class UndefinedErrorWarning(UserWarning):
    """Reference trajectory is identically zero, so a relative error is undefined."""


@dataclass
class ErrorReport:
    e_l2l2: float
    e_l2h1: float
    ranks: tuple
    mu: tuple
    method: str
    e_l2l2_q: float = float("nan")
    e_l2h1_q: float = float("nan")
    extra: dict = field(default_factory=dict)


@dataclass
class AggregateReport:
    sup_l2l2: float
    avg_l2l2: float
    sup_l2h1: float
    avg_l2h1: float
    count: int
    rule: str
    mean_ranks: tuple = (float("nan"), float("nan"))
    max_ranks: tuple = (0, 0)
    seed: int | None = None


def _check_pair(rom_vals, fom_vals, times):
    rom_vals = np.asarray(rom_vals, dtype=float)
    fom_vals = np.asarray(fom_vals, dtype=float)
    if rom_vals.shape != fom_vals.shape or rom_vals.ndim != 2:
        raise ValidationError(
            f"trajectory arrays must share shape (n_times, Nx), got {rom_vals.shape} and {fom_vals.shape}"
        )
    times = np.asarray(times, dtype=float)
    if times.shape[0] != rom_vals.shape[0]:
        raise ValidationError("times do not match the number of snapshots")
    return rom_vals, fom_vals, times


def _time_integral(values, times):
    if times.size == 1:
        return float(values[0])
    return float(np.trapezoid(values, times))


def _ratio(num, den):
    if den == 0.0:
        raise ValidationError("reference trajectory is identically zero; relative error undefined")
    return math.sqrt(num / den)


def l2_sq(v, dx):
    """Squared discrete L2 norm per time level (cell-midpoint rule)."""
    return np.sum(v * v, axis=-1) * dx


def h1_sq(v, dx):
    """Squared discrete H1 norm per time level: L2 part plus forward-difference seminorm."""
    d = np.diff(v, axis=-1) / dx
    return l2_sq(v, dx) + np.sum(d * d, axis=-1) * dx


def _schedules(rom, fom, field_name):
    if rom.times.shape != fom.times.shape or not np.allclose(rom.times, fom.times, rtol=1e-12,
                                                             atol=1e-14):
        raise ValidationError("ROM and FOM snapshot schedules differ")
    return getattr(rom, field_name), getattr(fom, field_name), fom.times


def rel_error(rom_vals, fom_vals, times, dx, norm="l2"):
    """Relative space-time error between two ``(n_times, Nx)`` arrays.

    Time integrals use the trapezoidal rule over ``times``.
    """
    rom_vals, fom_vals, times = _check_pair(rom_vals, fom_vals, times)
    sq = l2_sq if norm == "l2" else h1_sq
    num = _time_integral(sq(rom_vals - fom_vals, dx), times)
    den = _time_integral(sq(fom_vals, dx), times)
    return _ratio(num, den)


def rel_error_l2l2(rom, fom, dx=1.0, field_name="h"):
    """Relative L2(0,T; L2) error of ``rom`` against ``fom`` for one field."""
    r, f, t = _schedules(rom, fom, field_name)
    return rel_error(r, f, t, dx, "l2")


def rel_error_l2h1(rom, fom, dx=1.0, field_name="h"):
    """Relative L2(0,T; H1) error of ``rom`` against ``fom`` for one field."""
    r, f, t = _schedules(rom, fom, field_name)
    return rel_error(r, f, t, dx, "h1")


def error_in_time(rom_vals, fom_vals, dx):
    """Instantaneous relative L2 error at each stored time (NaN where the reference vanishes)."""
    num = l2_sq(np.asarray(rom_vals) - np.asarray(fom_vals), dx)
    den = l2_sq(np.asarray(fom_vals), dx)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, np.sqrt(num / np.where(den > 0, den, 1.0)), np.nan)


def error_report(rom, fom, dx, ranks, mu, method, **extra) -> ErrorReport:
    return ErrorReport(
        e_l2l2=rel_error_l2l2(rom, fom, dx, "h"),
        e_l2h1=rel_error_l2h1(rom, fom, dx, "h"),
        e_l2l2_q=rel_error_l2l2(rom, fom, dx, "q"),
        e_l2h1_q=rel_error_l2h1(rom, fom, dx, "q"),
        ranks=tuple(int(r) for r in ranks),
        mu=tuple(float(v) for v in mu),
        method=method,
        extra=extra,
    )


def _mean(values, weights_axis, rule):
    values = np.asarray(values, dtype=float)
    if rule == "trapezoid" and values.size > 1:
        x = np.asarray(weights_axis, dtype=float)
        order = np.argsort(x)
        x, values = x[order], values[order]
        span = x[-1] - x[0]
        if span > 0:
            return float(np.trapezoid(values, x) / span)
    return float(values.mean())


def aggregate(reports, mode="over-domain", seed=None) -> AggregateReport:
    """Sup and mean of the errors in ``reports``.

    ``mode="over-hR"`` averages with the trapezoidal rule in ``hR``
    (normalised by the interval length); ``"over-domain"`` uses the
    arithmetic mean, as for Monte Carlo samples.
    """
    reports = list(reports)
    if not reports:
        raise ValidationError("cannot aggregate an empty list of reports")
    if mode not in ("over-hR", "over-domain"):
        raise ValidationError(f"unknown aggregation mode {mode!r}")
    rule = "trapezoid" if mode == "over-hR" else "mean"
    l2 = [r.e_l2l2 for r in reports]
    h1 = [r.e_l2h1 for r in reports]
    hr = [r.mu[1] for r in reports]
    ranks = np.array([r.ranks for r in reports], dtype=float)
    return AggregateReport(
        sup_l2l2=float(np.max(l2)),
        avg_l2l2=_mean(l2, hr, rule),
        sup_l2h1=float(np.max(h1)),
        avg_l2h1=_mean(h1, hr, rule),
        count=len(reports),
        rule=rule,
        mean_ranks=tuple(float(v) for v in ranks.mean(axis=0)),
        max_ranks=tuple(int(v) for v in ranks.max(axis=0)),
        seed=seed,
    )
