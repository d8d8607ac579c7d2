"""Galerkin reduced-order integration of the finite-volume scheme.

The reduced state is a pair of coefficient vectors. Each Heun stage lifts
them to a full state, evaluates the exact full-order right-hand side (LLF
fluxes, outflow ghosts, dry-cell rule) and projects the result back.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bases import LocalBasis
from .errors import DivergenceError, ValidationError
from .fom import (FieldState, ParameterPair, RunConfig, Trajectory, dam_break_ic, rhs,
                  snapshot_steps, speed_bound, time_grid)


@dataclass
class RomTrajectory:
    times: np.ndarray
    alpha_h: np.ndarray
    alpha_q: np.ndarray
    basis: LocalBasis
    dt: float
    info: dict = field(default_factory=dict)

    @property
    def h(self):
        return self.alpha_h @ self.basis.Vh.T

    @property
    def q(self):
        return self.alpha_q @ self.basis.Vq.T

    def to_trajectory(self) -> Trajectory:
        """Lifted full-space trajectory, comparable with a FOM run."""
        return Trajectory(times=self.times, h=self.h, q=self.q,
                          steps=np.asarray(self.info.get("steps", [])), dt=self.dt,
                          mu=self.basis.mu_star, info=dict(self.info))


def project_ic(state: FieldState, basis: LocalBasis):
    """Initial coefficients ``(Vh^T h0, Vq^T q0)``."""
    if state.h.shape[0] != basis.Vh.shape[0] or state.q.shape[0] != basis.Vq.shape[0]:
        raise ValidationError(
            f"state length {state.h.shape[0]} does not match basis rows {basis.Vh.shape[0]}"
        )
    return basis.Vh.T @ state.h, basis.Vq.T @ state.q


def reconstruct_state(alpha, basis: LocalBasis, t=0.0) -> FieldState:
    """Full state ``(Vh a_h, Vq a_q)``, without any clipping."""
    a_h, a_q = alpha
    if a_h.shape[0] != basis.l_h or a_q.shape[0] != basis.l_q:
        raise ValidationError("coefficient length does not match basis rank")
    return FieldState(h=basis.Vh @ a_h, q=basis.Vq @ a_q, t=t)


def _projected_rhs(a_h, a_q, Vh, Vq, dx, g, lam_bound):
    dh, dq, lam, _ = rhs(Vh @ a_h, Vq @ a_q, dx, g, lam_bound)
    return Vh.T @ dh, Vq.T @ dq, lam


def rom_step(alpha, basis: LocalBasis, dx, dt, g, lam_bound=None, step=None):
    """One Heun step of the projected system; returns ``(a_h, a_q, courant)``.

    ``lam_bound`` caps the local wave speed of the lifted state (see
    :func:`swerom.fom.limit_speed`); ``run_rom`` passes the run's time-step
    speed bound.
    """
    a_h, a_q = alpha
    Vh, Vq = basis.Vh, basis.Vq
    k1h, k1q, lam1 = _projected_rhs(a_h, a_q, Vh, Vq, dx, g, lam_bound)
    s_h, s_q = a_h + dt * k1h, a_q + dt * k1q
    k2h, k2q, lam2 = _projected_rhs(s_h, s_q, Vh, Vq, dx, g, lam_bound)
    new_h = 0.5 * (a_h + s_h + dt * k2h)
    new_q = 0.5 * (a_q + s_q + dt * k2q)
    if not (np.isfinite(new_h).all() and np.isfinite(new_q).all()):
        where = "" if step is None else f" at step {step}"
        raise DivergenceError(f"reduced state became non-finite{where}", step=step)
    return new_h, new_q, max(lam1, lam2) * dt / dx


def run_rom(mu_star, basis: LocalBasis, config: RunConfig) -> RomTrajectory:
    """Integrate the reduced model from the projected dam-break initial state.

    The time step and snapshot schedule are those of the full-order run at
    the same parameter, so the two trajectories can be compared directly.
    """
    if not isinstance(mu_star, ParameterPair):
        mu_star = ParameterPair(*mu_star)
    grid = config.grid()
    if basis.Vh.shape[0] != grid.Nx:
        raise ValidationError(f"basis has {basis.Vh.shape[0]} rows, grid has {grid.Nx} cells")
    dt, n_steps = time_grid(mu_star, config)
    lam_bound = speed_bound(mu_star, config)
    steps = snapshot_steps(n_steps, config.n_snapshots)
    a_h, a_q = project_ic(dam_break_ic(grid, mu_star, config.x_dam), basis)

    A_h = np.empty((steps.size, basis.l_h))
    A_q = np.empty((steps.size, basis.l_q))
    A_h[0], A_q[0] = a_h, a_q
    k = 1
    max_courant = 0.0
    for n in range(1, n_steps + 1):
        a_h, a_q, courant = rom_step((a_h, a_q), basis, grid.dx, dt, config.g, lam_bound, step=n)
        max_courant = max(max_courant, courant)
        if k < steps.size and n == steps[k]:
            A_h[k], A_q[k] = a_h, a_q
            k += 1
    return RomTrajectory(times=steps * dt, alpha_h=A_h, alpha_q=A_q, basis=basis, dt=dt,
                         info={"n_steps": n_steps, "steps": steps, "max_courant": max_courant})
