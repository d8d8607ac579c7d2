"""Command-line entry point: ``swerom offline|online|sweep|oracle``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import StoreIOError, SweromError, ValidationError
from .fom import ParameterPair, RunConfig
from .riemann import dry_bed_solution, sensitivity_slope, solve_middle_state, wet_bed_solution
from .sampling import NODE_KINDS, DEFAULT_BOX, ParameterGrid

log = logging.getLogger("swerom")


def _grid_shape(text):
    try:
        nl, nr = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NLxNR, e.g. 13x17, got {text!r}") from None
    return nl, nr


def _dims(text):
    try:
        lh, lq = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LH,LQ, e.g. 30,50, got {text!r}") from None
    return lh, lq


def _add_run_config(p):
    g = p.add_argument_group("full-order run settings")
    g.add_argument("--nx", type=int, default=None, help="interior cells (default 400)")
    g.add_argument("--t-final", type=float, default=1.4, help="final time in seconds")
    g.add_argument("--cfl", type=float, default=0.9)
    g.add_argument("--n-snapshots", type=int, default=101)
    g.add_argument("--paper-scale", action="store_true",
                   help=f"use Nx={ex.FINE_NX} unless --nx is given")


def _run_config(args) -> RunConfig:
    nx = args.nx if args.nx is not None else (ex.FINE_NX if args.paper_scale else 400)
    return RunConfig(Nx=nx, T=args.t_final, cfl=args.cfl, n_snapshots=args.n_snapshots)


def _add_workers(p):
    p.add_argument("--workers", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swerom", description="Tensor reduced-order models for the 1D dam-break problem.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    # offline
    off = sub.add_parser("offline", help="build and compress a snapshot store")
    off_sub = off.add_subparsers(dest="action", required=True)
    gen = off_sub.add_parser("generate", help="run the full-order model over a training grid")
    gen.add_argument("--store", type=Path, required=True)
    gen.add_argument("--grid", type=_grid_shape, default=(13, 17), help="NLxNR (default 13x17)")
    gen.add_argument("--hr-nodes", choices=NODE_KINDS, default="chebyshev")
    gen.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    _add_run_config(gen)
    _add_workers(gen)
    comp = off_sub.add_parser("compress", help="Tucker-compress the snapshot tensors")
    comp.add_argument("--store", type=Path, required=True)
    comp.add_argument("--eps-h", type=float, default=ex.DEFAULT_EPS)
    comp.add_argument("--eps-q", type=float, default=ex.DEFAULT_EPS)

    # online
    on = sub.add_parser("online", help="online reduced-order solves")
    on_sub = on.add_subparsers(dest="action", required=True)
    solve = on_sub.add_parser("solve", help="solve at one parameter and compare with the FOM")
    solve.add_argument("--store", type=Path, required=True)
    solve.add_argument("--hl", type=float, required=True)
    solve.add_argument("--hr", type=float, required=True)
    solve.add_argument("--method", choices=("interp", "noninterp", "pod"), default="noninterp")
    solve.add_argument("--eps-loc", type=float, default=ex.DEFAULT_EPS_LOC)
    solve.add_argument("--dims", type=_dims, default=None, help="fixed LH,LQ instead of eps-loc")
    solve.add_argument("--p", type=int, default=2, help="Lagrange order per axis (interp)")
    solve.add_argument("--out", type=Path, default=None, help="directory for CSV output")

    # sweep
    sw = sub.add_parser("sweep", help="run an experiment preset")
    sw.add_argument("preset", choices=sorted(ex.PRESETS))
    sw.add_argument("--store", type=Path, required=True, help="workspace holding training stores")
    sw.add_argument("--out", type=Path, required=True, help="summary CSV path")
    sw.add_argument("--grid", type=_grid_shape, default=None)
    sw.add_argument("--hr-nodes", choices=NODE_KINDS, default=None)
    sw.add_argument("--hl", type=float, default=None, help="hL of an hR sweep")
    sw.add_argument("--n-eval", type=int, default=None, help="points in an hR sweep")
    sw.add_argument("--mc-samples", type=int, default=None)
    sw.add_argument("--seed", type=int, default=None)
    sw.add_argument("--method", choices=("interp", "noninterp", "pod"), default=None)
    sw.add_argument("--eps-loc", type=float, default=None)
    sw.add_argument("--dims", type=_dims, default=None)
    sw.add_argument("--p", type=int, default=None)
    sw.add_argument("--eps-h", type=float, default=ex.DEFAULT_EPS)
    sw.add_argument("--eps-q", type=float, default=ex.DEFAULT_EPS)
    _add_run_config(sw)
    _add_workers(sw)

    # oracle
    orc = sub.add_parser("oracle", help="analytical dam-break solutions")
    orc.add_argument("kind", choices=("dry", "wet", "slope"))
    orc.add_argument("--hl", type=float, required=True)
    orc.add_argument("--hr", type=float, default=None)
    orc.add_argument("--t", type=float, default=1.0)
    orc.add_argument("--nx", type=int, default=400, help="profile sample points")
    orc.add_argument("--out", type=Path, default=None, help="CSV path (stdout if omitted)")
    return parser


def _write_or_print(path, columns, rows, prov):
    if path is not None:
        ex.write_csv(path, columns, rows, prov)
        print(f"wrote {path}")
        return
    print("# " + " ".join(f"{k}={v}" for k, v in prov.items()))
    print(",".join(columns))
    for r in rows:
        print(",".join(str(ex._fmt(v)) for v in r))


def cmd_offline(args):
    if args.action == "generate":
        if args.workers < 1:
            raise ValidationError("--workers must be >= 1")
        config = _run_config(args)
        grid = ParameterGrid.build(*args.grid, box=DEFAULT_BOX, hR_kind=args.hr_nodes)
        store = ex.offline_generate(args.store, grid, config, args.workers, args.seed)
        print(f"store {store.root}: {len(store.completed)} runs, dims {store.dims}")
    else:
        store = ex.SnapshotStore(args.store)
        res = ex.offline_compress(store, args.eps_h, args.eps_q)
        for var, (ranks, err) in res.items():
            print(f"{var}: ranks {ranks}, relative error {err:.3e}")
    return 0


def cmd_online(args):
    res = ex.online_solve(args.store, (args.hl, args.hr), args.method, args.eps_loc, args.dims,
                          args.p, args.out)
    r = res.report
    print(f"{r.method} mu={r.mu} ranks={r.ranks} E_L2L2={r.e_l2l2:.6e} E_L2H1={r.e_l2h1:.6e}")
    return 0


def cmd_sweep(args):
    if args.workers < 1:
        raise ValidationError("--workers must be >= 1")
    preset = ex.customize(ex.PRESETS[args.preset], grid=args.grid, hr_nodes=args.hr_nodes,
                          mc_samples=args.mc_samples, seed=args.seed, eps_loc=args.eps_loc,
                          dims=args.dims, method=args.method, n_eval=args.n_eval, hl=args.hl,
                          p=args.p)
    config = _run_config(args)
    res = ex.run_sweep(preset, args.store, config, args.workers, args.eps_h, args.eps_q)
    out, points = ex.write_sweep(res, preset, args.out)
    for row in res.summary:
        print(f"{row['training']:>18} {row['label']:>22}  avg E_L2L2={row['avg_l2l2']:.4e}"
              f"  sup={row['sup_l2l2']:.4e}  failed={row['failed']}")
    print(f"wrote {out} and {points}")
    return 0


def cmd_oracle(args):
    g, x_dam, lx = 9.81, 50.0, 100.0
    x = np.linspace(0.0, lx, args.nx)
    if args.kind == "dry":
        u, h = dry_bed_solution(x, args.t, args.hl, g, x_dam)
        prov = {"kind": "dry", "hL": args.hl, "t": args.t,
                "front": x_dam + 2 * np.sqrt(g * args.hl) * args.t}
        _write_or_print(args.out, ["x", "u", "h"], zip(x, u, h), prov)
    elif args.kind == "wet":
        if args.hr is None:
            raise ValidationError("wet oracle needs --hr")
        mu = ParameterPair(args.hl, args.hr)
        sol = solve_middle_state(args.hl, args.hr, g)
        u, h = wet_bed_solution(x, args.t, mu, g, x_dam, solution=sol)
        x1, x2, x3 = sol.positions(args.t, x_dam)
        prov = {"kind": "wet", "hL": args.hl, "hR": args.hr, "t": args.t, "h_m": sol.h_m,
                "u_m": sol.u_m, "s": sol.s, "x1": x1, "x2": x2, "x3": x3}
        _write_or_print(args.out, ["x", "u", "h"], zip(x, u, h), prov)
    else:
        samples = np.logspace(-6, -2, 13)
        slope = sensitivity_slope(args.hl, g, samples)
        slope_h = sensitivity_slope(args.hl, g, samples, differentiate=False)
        _write_or_print(args.out, ["hL", "slope_dhm_dhR", "slope_hm", "n_samples", "hR_min",
                                   "hR_max"],
                        [(args.hl, slope, slope_h, samples.size, samples[0], samples[-1])],
                        {"kind": "slope"})
    return 0


COMMANDS = {"offline": cmd_offline, "online": cmd_online, "sweep": cmd_sweep,
            "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SweromError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return StoreIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
