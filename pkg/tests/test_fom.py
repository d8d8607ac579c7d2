import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swerom.errors import StabilityError, ValidationError
from swerom.fom import (FieldState, ParameterPair, RunConfig, SpatialGrid, dam_break_ic, fom_step,
                        heun_update, llf_flux, run_fom, snapshot_steps, time_grid, wave_speed)
from swerom.riemann import solve_middle_state

G = 9.81


def test_run_config_defaults_and_grid():
    cfg = RunConfig()
    assert (cfg.g, cfg.Lx, cfg.Nx, cfg.x_dam, cfg.T, cfg.cfl, cfg.n_snapshots) == (
        9.81, 100.0, 400, 50.0, 1.4, 0.9, 101)
    grid = cfg.grid()
    assert grid.dx == pytest.approx(0.25)
    assert grid.centers[0] == pytest.approx(0.25) and grid.centers[-1] == pytest.approx(100.0)
    assert np.allclose(np.diff(grid.centers), grid.dx)
    assert len(grid.ghosts) == 2


@pytest.mark.parametrize("kwargs", [
    {"g": 0}, {"Lx": -1}, {"Nx": 3}, {"Nx": 10.5}, {"x_dam": 0}, {"x_dam": 100}, {"T": 0},
    {"cfl": 1.0}, {"cfl": 0}, {"n_snapshots": 1},
])
def test_run_config_rejects_invalid(kwargs):
    with pytest.raises(ValidationError):
        RunConfig(**kwargs)


def test_config_digest_tracks_fields():
    assert RunConfig().digest() == RunConfig().digest()
    assert RunConfig().digest() != RunConfig(Nx=200).digest()


def test_dam_break_ic_four_cells():
    grid = SpatialGrid.from_config(RunConfig(Nx=4))
    assert np.allclose(grid.centers, [25, 50, 75, 100])
    ic = dam_break_ic(grid, ParameterPair(10, 0), 50.0)
    assert ic.h.tolist() == [10, 0, 0, 0]
    assert ic.q.tolist() == [0, 0, 0, 0] and ic.t == 0


@pytest.mark.parametrize("mu", [(5, 5), (4, 6), (5, -1)])
def test_parameter_pair_rejects_invalid(mu):
    with pytest.raises(ValidationError):
        ParameterPair(*mu)


def test_dam_break_ic_piecewise_counts():
    grid = RunConfig().grid()
    ic = dam_break_ic(grid, ParameterPair(20, 4), 50.0)
    assert set(np.unique(ic.h)) == {4.0, 20.0}
    assert np.sum(ic.h == 20) == np.sum(grid.centers < 50.0)


def test_llf_constant_state():
    fh, fq = llf_flux((2, 0), (2, 0), G)
    assert fh == 0 and fq == pytest.approx(19.62, abs=1e-12)


def test_llf_dry_dry():
    assert llf_flux((0, 0), (0, 0), G) == (0.0, 0.0)


def test_llf_asymmetric_matches_exact_arithmetic():
    # 40-digit evaluation of the flux formula, lambda = 1 + sqrt(39.24)
    fh, fq = llf_flux((4, 4), (1, 0), G)
    assert fh == pytest.approx(12.8962758580195, rel=1e-12)
    assert fq == pytest.approx(58.2208678106927, rel=1e-12)


def test_llf_negative_depth_rejected():
    with pytest.raises(ValidationError):
        llf_flux((-1e-3, 0), (1, 0), G)


def test_llf_vectorised_matches_scalar(rng):
    hl, hr = rng.uniform(0, 5, 10), rng.uniform(0, 5, 10)
    ql, qr = rng.normal(size=10), rng.normal(size=10)
    fh, fq = llf_flux((hl, ql), (hr, qr), G)
    for k in range(10):
        assert (fh[k], fq[k]) == pytest.approx(llf_flux((hl[k], ql[k]), (hr[k], qr[k]), G))


def test_constant_state_preserved():
    grid = RunConfig(Nx=50).grid()
    s = FieldState(h=np.full(50, 3.0), q=np.zeros(50), t=0.0)
    for _ in range(20):
        s = fom_step(s, 0.01, grid, G)
    assert np.allclose(s.h, 3.0, rtol=1e-12, atol=0) and np.all(s.q == 0)


def test_mirror_symmetry_preserved(rng):
    grid = RunConfig(Nx=60).grid()
    half = rng.uniform(1, 4, 30)
    qh = rng.normal(size=30)
    s = FieldState(h=np.concatenate((half, half[::-1])), q=np.concatenate((qh, -qh[::-1])), t=0)
    out = fom_step(s, 0.01, grid, G)
    assert np.allclose(out.h, out.h[::-1], atol=1e-12)
    assert np.allclose(out.q, -out.q[::-1], atol=1e-12)


def _boundary_flux_oracle(h, q, dt, dx):
    """Stage-averaged boundary depth flux, recomputed from scalar LLF calls."""
    def edges(hh, qq):
        left = llf_flux((hh[0], qq[0]), (hh[0], qq[0]), G)[0]
        right = llf_flux((hh[-1], qq[-1]), (hh[-1], qq[-1]), G)[0]
        return left, right

    def L(hh, qq):
        n = hh.size
        fh = np.empty(n + 1)
        fq = np.empty(n + 1)
        he = np.r_[hh[0], hh, hh[-1]]
        qe = np.r_[qq[0], qq, qq[-1]]
        for k in range(n + 1):
            fh[k], fq[k] = llf_flux((he[k], qe[k]), (he[k + 1], qe[k + 1]), G)
        return -np.diff(fh) / dx, -np.diff(fq) / dx

    l1, r1 = edges(h, q)
    dh, dq = L(h, q)
    hs, qs = h + dt * dh, q + dt * dq
    l2, r2 = edges(hs, qs)
    return 0.5 * (l1 + l2), 0.5 * (r1 + r2)


def test_one_step_mass_change_telescopes():
    cfg = RunConfig()
    grid = cfg.grid()
    ic = dam_break_ic(grid, ParameterPair(20, 4), cfg.x_dam)
    dt, _ = time_grid(ParameterPair(20, 4), cfg)
    h1, _, _, (fl, fr) = heun_update(ic.h, ic.q, dt, grid.dx, G)
    ol, orr = _boundary_flux_oracle(ic.h, ic.q, dt, grid.dx)
    assert (fl, fr) == pytest.approx((ol, orr), rel=1e-13)
    change = np.sum(h1 - ic.h) * grid.dx
    assert abs(change + dt * (fr - fl)) <= 1e-12 * np.sum(ic.h) * grid.dx


@given(st.integers(0, 2**32 - 1), st.integers(8, 64), st.booleans())
def test_interior_mass_balance_property(seed, nx, with_dry):
    r = np.random.default_rng(seed)
    h = r.uniform(0.1, 10, nx)
    if with_dry:
        h[r.random(nx) < 0.3] = 0.0
    q = r.normal(0, 2, nx) * (h > 0)
    dx = 100.0 / nx
    dt = 0.45 * dx / wave_speed(h, q, G).max()
    h1, _, _, (fl, fr) = heun_update(h, q, dt, dx, G)
    total = np.sum(h) * dx
    assert abs(np.sum(h1 - h) * dx + dt * (fr - fl)) <= 1e-12 * total


@given(st.floats(10, 28), st.floats(0, 8), st.integers(20, 60))
def test_depth_nonnegative_property(hl, hr, nx):
    tr = run_fom((hl, hr), RunConfig(Nx=nx, T=0.5, n_snapshots=6))
    assert np.all(tr.h >= 0)
    assert tr.info["max_courant"] < 1


def test_cfl_violation_raises():
    grid = RunConfig(Nx=20).grid()
    s = FieldState(h=np.full(20, 10.0), q=np.zeros(20), t=0)
    with pytest.raises(StabilityError):
        fom_step(s, 1.0, grid, G)


def test_fom_step_rejects_nonpositive_dt():
    grid = RunConfig(Nx=20).grid()
    with pytest.raises(ValidationError):
        fom_step(FieldState(h=np.ones(20), q=np.zeros(20), t=0), 0.0, grid, G)


def test_trajectory_storage_contract():
    cfg = RunConfig(Nx=100)
    tr = run_fom((15, 2), cfg)
    ic = dam_break_ic(cfg.grid(), ParameterPair(15, 2), cfg.x_dam)
    assert tr.times[0] == 0 and np.array_equal(tr.h[0], ic.h) and np.array_equal(tr.q[0], ic.q)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == pytest.approx(cfg.T, rel=1e-12)
    assert tr.h.shape == (cfg.n_snapshots, cfg.Nx)
    assert tr.state(3).t == tr.times[3]


def test_snapshot_steps_stride():
    s = snapshot_steps(1000, 101)
    assert s[0] == 0 and s[-1] == 1000 and np.all(np.diff(s) == 10)
    with pytest.raises(ValidationError):
        snapshot_steps(5, 10)


def test_dry_front_speed():
    cfg = RunConfig(Nx=400)
    tr = run_fom((12, 0), cfg)
    x = cfg.grid().centers
    # wetted region: depth above one micrometre
    front = x[np.nonzero(tr.h[-1] > 1e-6)[0][-1]]
    exact = cfg.x_dam + 2 * math.sqrt(G * 12) * cfg.T
    assert abs(front - exact) <= 0.05 * exact


@pytest.mark.slow
def test_wet_plateau_matches_middle_state():
    cfg = RunConfig(Nx=800)
    tr = run_fom((20, 4), cfg)
    sol = solve_middle_state(20, 4, G)
    x1, x2, x3 = sol.positions(cfg.T, cfg.x_dam)
    x = cfg.grid().centers
    mid = (x > x2 + 0.25 * (x3 - x2)) & (x < x3 - 0.25 * (x3 - x2))
    assert np.max(np.abs(tr.h[-1][mid] - sol.h_m)) <= 0.02 * sol.h_m
