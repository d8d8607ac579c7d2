"""Finite-volume full-order model for the 1D shallow-water dam break.

Conservative variables are depth ``h`` and discharge ``q = h u``. Interface
fluxes use the local Lax-Friedrichs formula, time stepping is Heun (RK-2),
and both boundaries are outflow (ghost cells copy the nearest interior cell).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceError, StabilityError, ValidationError

#: Depth below which a cell is treated as dry (zero velocity, zero discharge).
H_EPS = 1e-12


@dataclass(frozen=True)
class RunConfig:
    """Physical and numerical settings shared by every run in a study.

    ``safety`` multiplies the initial-data wave speed bound when fixing the
    time step; the dry-bed front moves at ``2 sqrt(g hL)``, twice the largest
    speed visible in the initial data.
    """

    g: float = 9.81
    Lx: float = 100.0
    Nx: int = 400
    x_dam: float = 50.0
    T: float = 1.4
    cfl: float = 0.9
    n_snapshots: int = 101
    safety: float = 2.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValidationError(f"g must be positive, got {self.g}")
        if not self.Lx > 0:
            raise ValidationError(f"Lx must be positive, got {self.Lx}")
        if int(self.Nx) != self.Nx or self.Nx < 4:
            raise ValidationError(f"Nx must be an integer >= 4, got {self.Nx}")
        if not 0 < self.x_dam < self.Lx:
            raise ValidationError(f"x_dam must lie in (0, Lx), got {self.x_dam}")
        if not self.T > 0:
            raise ValidationError(f"T must be positive, got {self.T}")
        if not 0 < self.cfl < 1:
            raise ValidationError(f"cfl must lie in (0, 1), got {self.cfl}")
        if int(self.n_snapshots) != self.n_snapshots or self.n_snapshots < 2:
            raise ValidationError(f"n_snapshots must be >= 2, got {self.n_snapshots}")
        if not self.safety >= 1:
            raise ValidationError(f"safety must be >= 1, got {self.safety}")

    @property
    def dx(self) -> float:
        return self.Lx / self.Nx

    def grid(self) -> SpatialGrid:
        return SpatialGrid.from_config(self)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Short stable hash, used to key cached reference runs."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SpatialGrid:
    dx: float
    centers: np.ndarray
    ghosts: tuple

    @classmethod
    def from_config(cls, config: RunConfig) -> SpatialGrid:
        dx = config.dx
        centers = dx * np.arange(1, config.Nx + 1, dtype=float)
        # ghost positions only matter for plotting; outflow copies states
        ghosts = (-0.5 * dx, config.Lx + 0.5 * dx)
        return cls(dx=dx, centers=centers, ghosts=ghosts)

    @property
    def Nx(self) -> int:
        return self.centers.size


@dataclass(frozen=True)
class ParameterPair:
    """Dam-break parameters: upstream depth ``hL`` and downstream depth ``hR``."""

    hL: float
    hR: float

    def __post_init__(self):
        if not (math.isfinite(self.hL) and math.isfinite(self.hR)):
            raise ValidationError(f"non-finite parameters ({self.hL}, {self.hR})")
        if self.hR < 0:
            raise ValidationError(f"hR must be >= 0, got {self.hR}")
        if not self.hL > self.hR:
            raise ValidationError(f"need hL > hR, got hL={self.hL}, hR={self.hR}")

    def as_tuple(self) -> tuple[float, float]:
        return (float(self.hL), float(self.hR))


@dataclass(frozen=True)
class FieldState:
    h: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.h.shape != self.q.shape or self.h.ndim != 1:
            raise ValidationError(
                f"h and q must be 1D arrays of equal length, got {self.h.shape} and {self.q.shape}"
            )


@dataclass(frozen=True)
class Trajectory:
    """Stored snapshots of one run.

    ``h`` and ``q`` have shape ``(n_snapshots, Nx)``; ``steps`` holds the time
    step index of every stored snapshot.
    """

    times: np.ndarray
    h: np.ndarray
    q: np.ndarray
    steps: np.ndarray
    dt: float
    mu: ParameterPair | None = None
    info: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return self.times.size

    def state(self, k: int) -> FieldState:
        return FieldState(self.h[k], self.q[k], float(self.times[k]))

    @property
    def states(self) -> list[FieldState]:
        return [self.state(k) for k in range(self.n_snapshots)]


def dam_break_ic(grid: SpatialGrid, mu: ParameterPair, x_dam: float) -> FieldState:
    """Piecewise constant depth, ``hL`` left of the dam and ``hR`` from it on, at rest."""
    if not isinstance(mu, ParameterPair):
        mu = ParameterPair(*mu)
    h = np.where(grid.centers < x_dam, float(mu.hL), float(mu.hR))
    return FieldState(h=h, q=np.zeros_like(h), t=0.0)


def physical_flux(h, q, g):
    """Return ``(q, q^2/h + g h^2 / 2)`` with the advective term dropped in dry cells."""
    h = np.asarray(h, dtype=float)
    q = np.asarray(q, dtype=float)
    wet = h > H_EPS
    u = np.divide(q, h, out=np.zeros_like(q), where=wet)
    return q, q * u + 0.5 * g * h * h


def wave_speed(h, q, g):
    """Largest characteristic speed ``|u| + sqrt(g h)`` per cell."""
    h = np.asarray(h, dtype=float)
    q = np.asarray(q, dtype=float)
    wet = h > H_EPS
    u = np.divide(q, h, out=np.zeros_like(q), where=wet)
    return np.abs(u) + np.sqrt(g * np.maximum(h, 0.0))


def llf_flux(uL, uR, g):
    """Local Lax-Friedrichs flux between a left and a right state.

    Parameters
    ----------
    uL, uR : pair of float or arrays
        ``(h, q)`` on each side of the interface.
    g : float
        Gravitational acceleration.

    Returns
    -------
    tuple
        ``(flux_h, flux_q)``.
    """
    hl, ql = (np.asarray(v, dtype=float) for v in uL)
    hr, qr = (np.asarray(v, dtype=float) for v in uR)
    if np.any(hl < 0) or np.any(hr < 0):
        raise ValidationError("negative depth passed to llf_flux")
    fl_h, fl_q = physical_flux(hl, ql, g)
    fr_h, fr_q = physical_flux(hr, qr, g)
    lam = np.maximum(wave_speed(hl, ql, g), wave_speed(hr, qr, g))
    flux_h = 0.5 * (fl_h + fr_h) - 0.5 * lam * (hr - hl)
    flux_q = 0.5 * (fl_q + fr_q) - 0.5 * lam * (qr - ql)
    if flux_h.ndim == 0:
        return float(flux_h), float(flux_q)
    return flux_h, flux_q


def _dry_fix(h, q):
    """Floor depths at zero and zero the discharge in dry cells."""
    h = np.maximum(h, 0.0)
    q = np.where(h < H_EPS, 0.0, q)
    return h, q


def interface_fluxes(h, q, g):
    """LLF fluxes at all ``Nx + 1`` interfaces, with outflow ghost cells.

    Returns ``(flux_h, flux_q, lam)`` where ``lam`` is the per-interface wave
    speed bound.
    """
    he = np.concatenate(([h[0]], h, [h[-1]]))
    qe = np.concatenate(([q[0]], q, [q[-1]]))
    fh, fq = physical_flux(he, qe, g)
    s = wave_speed(he, qe, g)
    lam = np.maximum(s[:-1], s[1:])
    flux_h = 0.5 * (fh[:-1] + fh[1:]) - 0.5 * lam * (he[1:] - he[:-1])
    flux_q = 0.5 * (fq[:-1] + fq[1:]) - 0.5 * lam * (qe[1:] - qe[:-1])
    return flux_h, flux_q, lam


def limit_speed(h, q, g, lam_bound):
    """Rescale ``q`` wherever ``|u| + sqrt(g h)`` exceeds ``lam_bound``.

    Exact dam-break states never exceed the bound; lifted reduced states can,
    in nearly dry cells where small depth errors make ``q / h`` blow up.
    Cells within the bound are returned untouched.
    """
    c = np.sqrt(g * h)
    wet = h > H_EPS
    u = np.divide(q, h, out=np.zeros_like(q), where=wet)
    u_max = np.maximum(lam_bound - c, 0.0)
    over = np.abs(u) > u_max
    if not over.any():
        return q
    return np.where(over, np.sign(u) * u_max * h, q)


def rhs(h, q, dx, g, lam_bound=None):
    """Semi-discrete right-hand side ``-(F_{i+1/2} - F_{i-1/2}) / dx``.

    The state is passed through the dry-cell rule before flux evaluation, so
    the function also accepts slightly negative depths (as produced by a
    reduced basis). With ``lam_bound`` set, discharges are additionally
    limited by :func:`limit_speed`. Returns ``(dh, dq, lam_max,
    boundary_flux_h)`` where the last entry is ``(F_h at x=0, F_h at x=Lx)``.
    """
    h, q = _dry_fix(h, q)
    if lam_bound is not None:
        q = limit_speed(h, q, g, lam_bound)
    fh, fq, lam = interface_fluxes(h, q, g)
    dh = -(fh[1:] - fh[:-1]) / dx
    dq = -(fq[1:] - fq[:-1]) / dx
    return dh, dq, float(lam.max()), (float(fh[0]), float(fh[-1]))


def _check_cfl(lam_max, dt, dx, step=None):
    courant = lam_max * dt / dx
    if not courant < 1.0:
        where = "" if step is None else f" at step {step}"
        raise StabilityError(f"CFL violated{where}: lambda*dt/dx = {courant:.4f} >= 1")
    return courant


def heun_update(h, q, dt, dx, g, step=None):
    """One Heun step on raw arrays.

    Returns ``(h_new, q_new, courant, boundary_flux_h)``; the boundary fluxes
    are the stage average actually applied, so that
    ``sum(h_new - h) * dx == -dt * (right - left)`` up to roundoff.
    """
    dh1, dq1, lam1, bf1 = rhs(h, q, dx, g)
    c1 = _check_cfl(lam1, dt, dx, step)
    hs, qs = _dry_fix(h + dt * dh1, q + dt * dq1)
    dh2, dq2, lam2, bf2 = rhs(hs, qs, dx, g)
    c2 = _check_cfl(lam2, dt, dx, step)
    h_new = 0.5 * (h + hs + dt * dh2)
    q_new = 0.5 * (q + qs + dt * dq2)
    h_new, q_new = _dry_fix(h_new, q_new)
    bflux = (0.5 * (bf1[0] + bf2[0]), 0.5 * (bf1[1] + bf2[1]))
    return h_new, q_new, max(c1, c2), bflux


def fom_step(state: FieldState, dt: float, grid: SpatialGrid, g: float) -> FieldState:
    """Advance ``state`` by one Heun step of size ``dt``."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    h, q, _, _ = heun_update(state.h, state.q, dt, grid.dx, g)
    return FieldState(h=h, q=q, t=state.t + dt)


def speed_bound(mu: ParameterPair, config: RunConfig) -> float:
    """Wave speed bound behind the fixed time step: ``safety * sqrt(g hL)``."""
    return config.safety * math.sqrt(config.g * max(mu.hL, mu.hR))


def time_grid(mu: ParameterPair, config: RunConfig) -> tuple[float, int]:
    """Fixed time step and step count for a run at ``mu``.

    The CFL step is computed from the initial data wave speed times
    ``config.safety`` and then shortened so an integer number of steps lands
    exactly on ``T`` (and there are at least ``n_snapshots - 1`` steps).
    """
    lam0 = speed_bound(mu, config)
    dt_max = config.cfl * config.dx / lam0
    n_steps = max(math.ceil(config.T / dt_max - 1e-12), config.n_snapshots - 1)
    return config.T / n_steps, n_steps


def snapshot_steps(n_steps: int, n_snapshots: int) -> np.ndarray:
    """Step indices at which snapshots are stored: first, last and evenly strided between."""
    idx = np.rint(np.linspace(0, n_steps, n_snapshots)).astype(int)
    if np.any(np.diff(idx) <= 0):
        raise ValidationError(f"cannot place {n_snapshots} snapshots in {n_steps} steps")
    return idx


def run_fom(mu: ParameterPair, config: RunConfig) -> Trajectory:
    """Integrate the dam break at ``mu`` up to ``config.T`` and store snapshots."""
    if not isinstance(mu, ParameterPair):
        mu = ParameterPair(*mu)
    grid = config.grid()
    ic = dam_break_ic(grid, mu, config.x_dam)
    dt, n_steps = time_grid(mu, config)
    steps = snapshot_steps(n_steps, config.n_snapshots)

    H = np.empty((config.n_snapshots, config.Nx))
    Q = np.empty_like(H)
    H[0], Q[0] = ic.h, ic.q
    h, q = ic.h, ic.q
    k = 1
    max_courant = 0.0
    for n in range(1, n_steps + 1):
        h, q, courant, _ = heun_update(h, q, dt, grid.dx, config.g, step=n)
        max_courant = max(max_courant, courant)
        if not (np.isfinite(h).all() and np.isfinite(q).all()):
            raise DivergenceError(f"non-finite state at step {n} for mu={mu.as_tuple()}", step=n)
        if k < steps.size and n == steps[k]:
            H[k], Q[k] = h, q
            k += 1
    return Trajectory(
        times=steps * dt,
        h=H,
        q=Q,
        steps=steps,
        dt=dt,
        mu=mu,
        info={"n_steps": n_steps, "max_courant": max_courant},
    )
