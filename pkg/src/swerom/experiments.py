"""Offline/online pipeline, experiment presets and CSV output.

Offline: run the full-order model over a training grid into a
:class:`~swerom.store.SnapshotStore`, then compress both snapshot tensors.
Online: build a basis for a new parameter, integrate the reduced model and
compare against a (cached) full-order reference.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bases import METHODS, PodModes, build_basis
from .errors import NumericalError, StoreIOError, SweromError, ValidationError
from .fom import ParameterPair, RunConfig, Trajectory, run_fom
from .metrics import ErrorReport, aggregate, error_in_time, error_report
from .rom import run_rom
from .sampling import DEFAULT_BOX, ParameterGrid, monte_carlo_params
from .store import SnapshotStore, read_array, write_array
from .tensor import hosvd_truncate, relative_error

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_EPS_LOC = 4e-3
SWEEP_POINTS = 80
MC_SAMPLES = 64
FINE_NX = 1600


# -- CSV helpers --------------------------------------------------------------

def write_csv(path, columns, rows, provenance):
    """Write ``rows`` under a ``# key=value`` provenance line and a header row."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write("# " + " ".join(f"{k}={v}" for k, v in provenance.items()) + "\n")
            w = csv.writer(f)
            w.writerow(columns)
            for row in rows:
                vals = [row.get(c, "") for c in columns] if isinstance(row, dict) else row
                w.writerow([_fmt(v) for v in vals])
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc}", path=str(path)) from exc
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns ``(provenance, rows)``."""
    with open(path, newline="") as f:
        first = f.readline()
        prov = dict(kv.split("=", 1) for kv in first[1:].split()) if first.startswith("#") else {}
        if not first.startswith("#"):
            f.seek(0)
        return prov, list(csv.DictReader(f))


def _fmt(v):
    if isinstance(v, (np.integer, bool)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return v


# -- offline ------------------------------------------------------------------

def _fom_job(i, j, mu, config):
    return i, j, run_fom(mu, config)


def offline_generate(root, grid: ParameterGrid, config: RunConfig, workers=1, seed=None):
    """Run the full-order model at every grid pair not yet stored.

    Completed ``(i, j)`` slices recorded in the manifest are skipped, so an
    interrupted run resumes where it stopped. Worker processes only compute;
    the calling process is the single writer.
    """
    store = SnapshotStore.create(root, grid, config, seed=seed)
    done = store.completed
    todo = [(i, j, mu) for i, j, mu in grid.pairs() if (i, j) not in done]
    log.info("offline generate: %d of %d runs to do", len(todo), grid.shape[0] * grid.shape[1])

    def fail(i, j, mu, exc):
        exc.args = (f"full-order run failed at grid pair ({i}, {j}) mu={mu.as_tuple()}: {exc}",)
        raise exc

    if workers <= 1 or len(todo) <= 1:
        for i, j, mu in todo:
            try:
                traj = run_fom(mu, config)
            except NumericalError as exc:
                fail(i, j, mu, exc)
            store.write_slice(i, j, traj)
        return store

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_fom_job, i, j, mu, config): (i, j, mu) for i, j, mu in todo}
        for fut in as_completed(futures):
            i, j, mu = futures[fut]
            try:
                _, _, traj = fut.result()
            except NumericalError as exc:
                for other in futures:
                    other.cancel()
                fail(i, j, mu, exc)
            store.write_slice(i, j, traj)
    return store


def offline_compress(store: SnapshotStore, eps_h=DEFAULT_EPS, eps_q=DEFAULT_EPS):
    """Tucker-compress both snapshot tensors and record the measured errors."""
    if not store.is_complete:
        nl, nr = store.grid.shape
        raise ValidationError(
            f"store {store.root} holds {len(store.completed)} of {nl * nr} runs; generate first"
        )
    out = {}
    for var, eps in (("h", eps_h), ("q", eps_q)):
        if not 0 < eps < 1:
            raise ValidationError(f"eps_{var} must lie in (0, 1), got {eps}")
        Q = store.tensor(var)
        model = hosvd_truncate(Q, eps)
        err = relative_error(Q, model) if model.norm > 0 else 0.0
        if err > eps * (1 + 1e-9):
            # the budget guarantees the bound; retry with every mode at full rank
            model = hosvd_truncate(Q, 1e-15)
            err = relative_error(Q, model)
            if err > eps:
                raise NumericalError(
                    f"internal consistency: HOSVD error {err:.3e} exceeds eps_{var}={eps:g}"
                )
        store.save_tucker(var, model, float(err))
        out[var] = (model.ranks, float(err))
        log.info("compressed %s: ranks %s, relative error %.3e", var, model.ranks, err)
    return out


# -- reference cache ----------------------------------------------------------

class ReferenceCache:
    """Full-order trajectories keyed by parameter and run-config digest.

    Kept in memory and, when ``directory`` is given, as ``.npz`` files so
    repeated sweeps skip the reference runs.
    """

    def __init__(self, directory=None):
        self.directory = None if directory is None else Path(directory)
        self._mem = {}

    def _key(self, mu: ParameterPair, config: RunConfig):
        return f"fom_{config.digest()}_{float(mu.hL).hex()}_{float(mu.hR).hex()}"

    def get(self, mu, config: RunConfig) -> Trajectory:
        if not isinstance(mu, ParameterPair):
            mu = ParameterPair(*mu)
        key = self._key(mu, config)
        if key in self._mem:
            return self._mem[key]
        path = None if self.directory is None else self.directory / f"{key}.npz"
        traj = None
        if path is not None and path.exists():
            try:
                with np.load(path) as d:
                    traj = Trajectory(times=d["times"], h=d["h"], q=d["q"], steps=d["steps"],
                                      dt=float(d["dt"]), mu=mu)
            except (OSError, ValueError, KeyError):
                log.warning("ignoring unreadable cache entry %s", path)
        if traj is None:
            traj = run_fom(mu, config)
            if path is not None:
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    tmp = path.with_name(path.stem + ".tmp.npz")
                    np.savez(tmp, times=traj.times, h=traj.h, q=traj.q, steps=traj.steps,
                             dt=traj.dt)
                    tmp.replace(path)
                except OSError as exc:
                    raise StoreIOError(f"cannot write cache {path}: {exc}", path=str(path)) from exc
        self._mem[key] = traj
        return traj


# -- online -------------------------------------------------------------------

@dataclass
class OnlineResult:
    report: ErrorReport
    rom: Trajectory
    fom: Trajectory
    basis: object


class OnlineContext:
    """Everything the online phase needs from one compressed store."""

    def __init__(self, store: SnapshotStore, cache: ReferenceCache | None = None):
        self.store = store
        self.grid = store.grid
        self.config = store.config
        self.manifest_hash = store.manifest_hash()
        self.cache = cache if cache is not None else ReferenceCache(store.aux_path("fom_cache"))
        self._models = None
        self._pod = None

    @classmethod
    def open(cls, root, cache=None):
        return cls(SnapshotStore(root), cache)

    @property
    def models(self):
        if self._models is None:
            if not self.store.is_compressed:
                raise ValidationError(f"store {self.store.root} is not compressed; run offline compress")
            self._models = (self.store.load_tucker("h"), self.store.load_tucker("q"))
        return self._models

    @property
    def pod(self):
        """Global POD modes of both snapshot matrices, cached in the store."""
        if self._pod is None:
            modes = []
            for var in ("h", "q"):
                pu, ps = self.store.aux_path(f"pod_{var}_U.bin"), self.store.aux_path(f"pod_{var}_s.bin")
                if pu.exists() and ps.exists():
                    modes.append(PodModes(U=read_array(pu), s=read_array(ps)))
                    continue
                m = PodModes.from_snapshots(self.store.tensor(var))
                write_array(pu, m.U)
                write_array(ps, m.s)
                modes.append(m)
            self._pod = tuple(modes)
        return self._pod

    def check_mu(self, mu) -> ParameterPair:
        if not isinstance(mu, ParameterPair):
            mu = ParameterPair(*mu)
        if not self.grid.contains(mu):
            lo_l, hi_l, lo_r, hi_r = self.grid.box
            raise ValidationError(
                f"mu*={mu.as_tuple()} lies outside the training box "
                f"hL in [{lo_l:g}, {hi_l:g}], hR in [{lo_r:g}, {hi_r:g}]"
            )
        return mu

    def basis(self, mu, method="noninterp", eps_loc=DEFAULT_EPS_LOC, dims=None, p=2):
        mu = self.check_mu(mu)
        if method == "pod":
            return build_basis("pod", mu, pod=self.pod, dims=dims)
        return build_basis(method, mu, models=self.models, grid=self.grid, eps_loc=eps_loc,
                           dims=dims, p=p)

    def solve(self, mu, method="noninterp", eps_loc=DEFAULT_EPS_LOC, dims=None, p=2) -> OnlineResult:
        mu = self.check_mu(mu)
        basis = self.basis(mu, method, eps_loc, dims, p)
        rom = run_rom(mu, basis, self.config).to_trajectory()
        fom = self.cache.get(mu, self.config)
        rep = error_report(rom, fom, self.config.dx, basis.ranks, mu.as_tuple(), method,
                           eps_loc=eps_loc if dims is None else None, p=p)
        return OnlineResult(report=rep, rom=rom, fom=fom, basis=basis)


REPORT_COLUMNS = ["method", "hL", "hR", "l_h", "l_q", "e_l2l2", "e_l2h1", "e_l2l2_q", "e_l2h1_q",
                  "eps_loc", "status", "manifest_hash"]


def report_row(rep: ErrorReport, manifest_hash, status="ok"):
    return {"method": rep.method, "hL": rep.mu[0], "hR": rep.mu[1], "l_h": rep.ranks[0],
            "l_q": rep.ranks[1], "e_l2l2": rep.e_l2l2, "e_l2h1": rep.e_l2h1,
            "e_l2l2_q": rep.e_l2l2_q, "e_l2h1_q": rep.e_l2h1_q,
            "eps_loc": rep.extra.get("eps_loc") or "", "status": status,
            "manifest_hash": manifest_hash}


def online_solve(root, mu, method="noninterp", eps_loc=DEFAULT_EPS_LOC, dims=None, p=2, out=None):
    """Solve one online query and write profile, error-in-time and report CSVs to ``out``."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    ctx = OnlineContext.open(root)
    res = ctx.solve(mu, method, eps_loc, dims, p)
    if out is not None:
        out = Path(out)
        prov = {"manifest_hash": ctx.manifest_hash, "method": method,
                "hL": res.report.mu[0], "hR": res.report.mu[1]}
        x = ctx.config.grid().centers
        write_csv(out / "profile.csv", ["x", "h_fom", "h_rom", "q_fom", "q_rom"],
                  zip(x, res.fom.h[-1], res.rom.h[-1], res.fom.q[-1], res.rom.q[-1]), prov)
        eh = error_in_time(res.rom.h, res.fom.h, ctx.config.dx)
        eq = error_in_time(res.rom.q, res.fom.q, ctx.config.dx)
        write_csv(out / "error_time.csv", ["t", "rel_l2_h", "rel_l2_q"],
                  zip(res.fom.times, eh, eq), prov)
        write_csv(out / "report.csv", REPORT_COLUMNS, [report_row(res.report, ctx.manifest_hash)],
                  prov)
    return res


# -- presets ------------------------------------------------------------------

@dataclass(frozen=True)
class TrainingSpec:
    n_L: int
    n_R: int
    hR_kind: str = "chebyshev"
    hL_kind: str = "uniform"

    def grid(self, box=DEFAULT_BOX) -> ParameterGrid:
        return ParameterGrid.build(self.n_L, self.n_R, box, self.hR_kind, self.hL_kind)

    @property
    def tag(self):
        kinds = self.hR_kind if self.hL_kind == "uniform" else f"{self.hL_kind}-{self.hR_kind}"
        return f"{self.n_L}x{self.n_R}_{kinds}"


@dataclass(frozen=True)
class EvalSpec:
    """Evaluation set: explicit points, an ``hR`` sweep at fixed ``hL``, or Monte Carlo."""

    kind: str
    points: tuple = ()
    hL: float = 25.0
    n: int = SWEEP_POINTS
    seed: int = 0

    def params(self, box=DEFAULT_BOX):
        if self.kind == "points":
            return [ParameterPair(*p) for p in self.points]
        if self.kind == "hr-sweep":
            return [ParameterPair(self.hL, float(v)) for v in np.linspace(box[2], box[3], self.n)]
        if self.kind == "mc":
            return monte_carlo_params(box, self.n, self.seed)
        raise ValidationError(f"unknown evaluation kind {self.kind!r}")

    @property
    def aggregate_mode(self):
        return "over-hR" if self.kind == "hr-sweep" else "over-domain"


@dataclass(frozen=True)
class MethodSpec:
    """One row family of a table.

    ``dims`` fixes ``(l_h, l_q)``; ``match`` names an earlier method whose
    adaptive ranks at the same point are reused (equal-dimension comparison).
    """

    label: str
    method: str
    eps_loc: float = DEFAULT_EPS_LOC
    dims: tuple | None = None
    match: str | None = None
    p: int = 2


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    description: str
    trainings: tuple
    evaluation: EvalSpec
    methods: tuple
    box: tuple = DEFAULT_BOX

    def __post_init__(self):
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValidationError("method labels must be unique")
        for k, m in enumerate(self.methods):
            if m.method not in METHODS:
                raise ValidationError(f"unknown method {m.method!r}")
            if m.method == "pod" and m.dims is None and m.match is None:
                raise ValidationError("POD rows need fixed dims or a matched method")
            if m.match is not None and m.match not in labels[:k]:
                raise ValidationError(f"{m.label!r} matches unknown or later method {m.match!r}")
        lo_l, hi_l, lo_r, hi_r = self.box
        if self.evaluation.kind == "points":
            for hl, hr in self.evaluation.points:
                if not (lo_l <= hl <= hi_l and lo_r <= hr <= hi_r):
                    raise ValidationError(f"evaluation point {(hl, hr)} outside box {self.box}")
        if self.evaluation.kind == "hr-sweep" and not lo_l <= self.evaluation.hL <= hi_l:
            raise ValidationError(f"sweep hL={self.evaluation.hL} outside box {self.box}")


_NONINTERP = MethodSpec("tROM-noninterp", "noninterp")
_TRAINING_PAIRS = ((4, 5), (7, 9), (13, 17), (20, 25))

PRESETS = {
    "threshold": ExperimentPreset(
        "threshold", "local threshold sweep at two parameter points",
        (TrainingSpec(13, 17),),
        EvalSpec("points", points=((27.0, 0.14), (27.0, 3.0))),
        tuple(MethodSpec(f"noninterp-eps{e:g}", "noninterp", eps_loc=e)
              for e in (4e-2, 1e-2, 4e-3, 1e-3)),
    ),
    "table2": ExperimentPreset(
        "table2", "adaptive versus fixed dimensions along hR at hL=25",
        (TrainingSpec(13, 17),),
        EvalSpec("points", points=tuple((25.0, v) for v in (0, 0.02, 0.07, 0.5, 1, 2, 3, 5, 7))),
        (MethodSpec("adaptive", "noninterp"), MethodSpec("fixed", "noninterp", dims=(30, 50))),
    ),
    "table4": ExperimentPreset(
        "table4", "Chebyshev versus uniform hR nodes",
        tuple(TrainingSpec(13, nr, kind) for nr in (5, 9, 17) for kind in ("chebyshev", "uniform")),
        EvalSpec("hr-sweep", hL=25.0),
        (_NONINTERP,),
    ),
    "table5": ExperimentPreset(
        "table5", "interpolatory versus non-interpolatory tensor ROM",
        tuple(TrainingSpec(13, nr) for nr in (5, 9, 17)),
        EvalSpec("hr-sweep", hL=25.0),
        (MethodSpec("tROM-interp", "interp"), _NONINTERP),
    ),
    "table6": ExperimentPreset(
        "table6", "tensor ROM versus POD at matched adaptive dimensions",
        tuple(TrainingSpec(nl, nr) for nl, nr in _TRAINING_PAIRS),
        EvalSpec("mc", n=MC_SAMPLES, seed=0),
        (MethodSpec("tROM", "noninterp"), MethodSpec("POD", "pod", match="tROM")),
    ),
    "table7": ExperimentPreset(
        "table7", "tensor ROM versus POD at fixed dimensions (30, 50)",
        tuple(TrainingSpec(nl, nr) for nl, nr in _TRAINING_PAIRS),
        EvalSpec("mc", n=MC_SAMPLES, seed=0),
        (MethodSpec("tROM", "noninterp", dims=(30, 50)), MethodSpec("POD", "pod", dims=(30, 50))),
    ),
}


def customize(preset: ExperimentPreset, *, grid=None, hr_nodes=None, mc_samples=None, seed=None,
              eps_loc=None, dims=None, method=None, n_eval=None, hl=None, p=None):
    """Return a copy of ``preset`` with command-line overrides applied."""
    trainings = list(preset.trainings)
    if grid is not None:
        kinds = dict.fromkeys(t.hR_kind for t in trainings)
        trainings = [TrainingSpec(grid[0], grid[1], k) for k in kinds]
    if hr_nodes is not None:
        trainings = list(dict.fromkeys(replace(t, hR_kind=hr_nodes) for t in trainings))
    ev = preset.evaluation
    if mc_samples is not None:
        ev = replace(ev, n=int(mc_samples)) if ev.kind == "mc" else ev
    if n_eval is not None and ev.kind == "hr-sweep":
        ev = replace(ev, n=int(n_eval))
    if seed is not None:
        ev = replace(ev, seed=int(seed))
    if hl is not None and ev.kind == "hr-sweep":
        ev = replace(ev, hL=float(hl))
    methods = list(preset.methods)
    if method is not None:
        methods = [m for m in methods if m.method == method]
        if not methods:
            raise ValidationError(f"preset {preset.name!r} has no {method!r} rows")
        labels = {m.label for m in methods}
        if dims is None and any(m.match is not None and m.match not in labels for m in methods):
            raise ValidationError(f"{method!r} rows of {preset.name!r} copy ranks from another "
                                  "method; pass --dims as well")
    if eps_loc is not None:
        methods = [replace(m, eps_loc=float(eps_loc)) for m in methods]
    if dims is not None:
        methods = [replace(m, dims=tuple(dims), match=None) for m in methods]
    if p is not None:
        methods = [replace(m, p=int(p)) for m in methods]
    # several threshold rows may collapse onto one label after an eps override
    methods = list({m.label: m for m in methods}.values())
    return replace(preset, trainings=tuple(trainings), evaluation=ev, methods=tuple(methods))


# -- sweeps -------------------------------------------------------------------

def store_dir(root, training: TrainingSpec, config: RunConfig) -> Path:
    return Path(root) / f"train_{training.tag}_{config.digest()}"


def ensure_store(root, training: TrainingSpec, config: RunConfig, eps_h=DEFAULT_EPS,
                 eps_q=DEFAULT_EPS, workers=1, box=DEFAULT_BOX) -> SnapshotStore:
    """Open the training store under ``root``, generating and compressing it if needed."""
    store = offline_generate(store_dir(root, training, config), training.grid(box), config, workers)
    tucker = store.manifest.get("tucker", {})
    if tucker.get("h", {}).get("eps") != eps_h or tucker.get("q", {}).get("eps") != eps_q:
        offline_compress(store, eps_h, eps_q)
    return store


POINT_COLUMNS = ["training", "label"] + REPORT_COLUMNS[:-2] + ["status", "message", "manifest_hash"]
SUMMARY_COLUMNS = ["preset", "training", "n_L", "n_R", "hR_nodes", "label", "method", "eps_loc",
                   "dims", "rule", "count", "failed", "sup_l2l2", "avg_l2l2", "sup_l2h1",
                   "avg_l2h1", "mean_l_h", "max_l_h", "mean_l_q", "max_l_q", "seed",
                   "manifest_hash"]


def evaluate_point(ctx: OnlineContext, mu: ParameterPair, methods):
    """Run every method at one parameter; failures become flagged rows."""
    rows, ranks = [], {}
    for m in methods:
        dims = m.dims
        if m.match is not None:
            dims = ranks.get(m.match)
            if dims is None:
                rows.append({"label": m.label, "method": m.method, "hL": mu.hL, "hR": mu.hR,
                             "status": "error", "message": f"no ranks from {m.match}"})
                continue
        try:
            res = ctx.solve(mu, m.method, m.eps_loc, dims, m.p)
        except (SweromError, np.linalg.LinAlgError) as exc:
            log.warning("%s at %s failed: %s", m.label, mu.as_tuple(), exc)
            rows.append({"label": m.label, "method": m.method, "hL": mu.hL, "hR": mu.hR,
                         "status": "error", "message": str(exc)})
            continue
        ranks[m.label] = res.report.ranks
        row = report_row(res.report, ctx.manifest_hash)
        row.update(label=m.label, message="", eps_loc=m.eps_loc if dims is None else "")
        rows.append(row)
    return rows


_WORKER_CTX = None


def _init_worker(root, cache_dir):
    global _WORKER_CTX
    _WORKER_CTX = OnlineContext.open(root, ReferenceCache(cache_dir))


def _worker_point(args):
    mu, methods = args
    return evaluate_point(_WORKER_CTX, mu, methods)


@dataclass
class SweepResult:
    summary: list = field(default_factory=list)
    points: list = field(default_factory=list)
    hashes: dict = field(default_factory=dict)


def _reports_from_rows(rows):
    out = []
    for r in rows:
        if r["status"] != "ok":
            continue
        out.append(ErrorReport(e_l2l2=r["e_l2l2"], e_l2h1=r["e_l2h1"], ranks=(r["l_h"], r["l_q"]),
                               mu=(r["hL"], r["hR"]), method=r["method"]))
    return out


def run_sweep(preset: ExperimentPreset, root, config: RunConfig, workers=1, eps_h=DEFAULT_EPS,
              eps_q=DEFAULT_EPS) -> SweepResult:
    """Evaluate every method of ``preset`` for each of its training grids.

    Missing training stores are built under ``root``; full-order references
    are cached in ``root/fom_cache``.
    """
    root = Path(root)
    cache_dir = root / "fom_cache"
    params = preset.evaluation.params(preset.box)
    result = SweepResult()
    for tr in preset.trainings:
        store = ensure_store(root, tr, config, eps_h, eps_q, workers, preset.box)
        ctx = OnlineContext(store, ReferenceCache(cache_dir))
        if preset.evaluation.kind != "mc":
            for mu in params:
                ctx.check_mu(mu)
        if any(m.method == "pod" for m in preset.methods):
            ctx.pod  # build once before workers start  # noqa: B018
        if workers > 1 and len(params) > 1:
            with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                     initargs=(str(store.root), str(cache_dir))) as pool:
                per_point = list(pool.map(_worker_point, [(mu, preset.methods) for mu in params]))
        else:
            per_point = [evaluate_point(ctx, mu, preset.methods) for mu in params]
        rows = [dict(r, training=tr.tag, manifest_hash=ctx.manifest_hash)
                for pr in per_point for r in pr]
        result.points.extend(rows)
        result.hashes[tr.tag] = ctx.manifest_hash
        for m in preset.methods:
            mrows = [r for r in rows if r["label"] == m.label]
            reps = _reports_from_rows(mrows)
            summary = {"preset": preset.name, "training": tr.tag, "n_L": tr.n_L, "n_R": tr.n_R,
                       "hR_nodes": tr.hR_kind, "label": m.label, "method": m.method,
                       "eps_loc": m.eps_loc if m.dims is None and m.method != "pod" else "",
                       "dims": "" if m.dims is None else f"{m.dims[0]},{m.dims[1]}",
                       "rule": "", "count": len(reps), "failed": len(mrows) - len(reps),
                       "seed": preset.evaluation.seed if preset.evaluation.kind == "mc" else "",
                       "manifest_hash": ctx.manifest_hash}
            if m.match is not None:
                summary["dims"] = f"match:{m.match}"
            if reps:
                agg = aggregate(reps, preset.evaluation.aggregate_mode)
                summary.update(rule=agg.rule, sup_l2l2=agg.sup_l2l2, avg_l2l2=agg.avg_l2l2,
                               sup_l2h1=agg.sup_l2h1, avg_l2h1=agg.avg_l2h1,
                               mean_l_h=agg.mean_ranks[0], max_l_h=agg.max_ranks[0],
                               mean_l_q=agg.mean_ranks[1], max_l_q=agg.max_ranks[1])
            else:
                summary.update({k: float("nan") for k in SUMMARY_COLUMNS[12:20]})
            result.summary.append(summary)
    return result


def write_sweep(result: SweepResult, preset: ExperimentPreset, out):
    """Write the summary table to ``out`` and per-point rows next to it."""
    out = Path(out)
    prov = {"preset": preset.name,
            "manifest_hash": ",".join(f"{k}:{v}" for k, v in result.hashes.items())}
    write_csv(out, SUMMARY_COLUMNS, result.summary, prov)
    points = out.with_name(out.stem + "_points" + (out.suffix or ".csv"))
    write_csv(points, POINT_COLUMNS, result.points, prov)
    return out, points
