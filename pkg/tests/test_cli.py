import math

import numpy as np
import pytest

from swerom import experiments as ex
from swerom.cli import main
from swerom.errors import ValidationError
from swerom.fom import ParameterPair, RunConfig
from swerom.riemann import solve_middle_state


def _csv(path):
    return ex.read_csv(path)


def test_oracle_dry_front(tmp_path):
    out = tmp_path / "dry.csv"
    assert main(["oracle", "dry", "--hl", "12", "--t", "1", "--nx", "2001", "--out", str(out)]) == 0
    prov, rows = _csv(out)
    x = np.array([float(r["x"]) for r in rows])
    h = np.array([float(r["h"]) for r in rows])
    front = 50 + 2 * math.sqrt(9.81 * 12)
    assert float(prov["front"]) == pytest.approx(front)
    assert x[np.nonzero(h > 0)[0][-1]] == pytest.approx(front, abs=0.05)


def test_oracle_wet_plateau(tmp_path):
    out = tmp_path / "wet.csv"
    assert main(["oracle", "wet", "--hl", "20", "--hr", "4", "--out", str(out)]) == 0
    prov, rows = _csv(out)
    sol = solve_middle_state(20, 4)
    assert float(prov["h_m"]) == pytest.approx(sol.h_m, rel=1e-14)
    x2, x3 = float(prov["x2"]), float(prov["x3"])
    mid = [r for r in rows if x2 < float(r["x"]) < x3]
    assert mid and all(float(r["h"]) == pytest.approx(sol.h_m) for r in mid)
    assert all(float(r["u"]) == pytest.approx(sol.u_m) for r in mid)


def test_oracle_slope(tmp_path, capsys):
    assert main(["oracle", "slope", "--hl", "25"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1].split(",")
    assert float(line[1]) == pytest.approx(-0.5, abs=0.1)
    assert float(line[2]) == pytest.approx(0.5, abs=0.1)


def test_oracle_errors_map_to_exit_codes(capsys):
    assert main(["oracle", "wet", "--hl", "20"]) == 2
    assert main(["oracle", "wet", "--hl", "20", "--hr", "0"]) == 2
    assert main(["oracle", "dry", "--hl", "12", "--t", "-1"]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_store_is_io_error(tmp_path):
    assert main(["online", "solve", "--store", str(tmp_path / "none"), "--hl", "20",
                 "--hr", "2"]) == 4


def test_bad_flag_values_rejected():
    with pytest.raises(SystemExit):
        main(["offline", "generate", "--store", "x", "--grid", "13by17"])
    with pytest.raises(SystemExit):
        main(["online", "solve", "--store", "x", "--hl", "1", "--hr", "0", "--dims", "3"])


@pytest.fixture(scope="module")
def cli_store(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "store"
    common = ["--nx", "60", "--t-final", "0.5", "--n-snapshots", "11"]
    assert main(["offline", "generate", "--store", str(root), "--grid", "3x4", *common]) == 0
    assert main(["offline", "compress", "--store", str(root), "--eps-h", "1e-6",
                 "--eps-q", "1e-6"]) == 0
    return root


def test_online_solve_outputs(cli_store, tmp_path):
    out = tmp_path / "o"
    assert main(["online", "solve", "--store", str(cli_store), "--hl", "21", "--hr", "3",
                 "--out", str(out)]) == 0
    prov, prof = _csv(out / "profile.csv")
    assert len(prof) == 60 and set(prof[0]) == {"x", "h_fom", "h_rom", "q_fom", "q_rom"}
    assert prov["manifest_hash"] == ex.SnapshotStore(cli_store).manifest_hash()
    _, et = _csv(out / "error_time.csv")
    assert len(et) == 11 and float(et[0]["t"]) == 0
    _, rep = _csv(out / "report.csv")
    assert rep[0]["status"] == "ok" and float(rep[0]["e_l2l2"]) < 0.05


def test_online_solve_fixed_dims_and_pod(cli_store, capsys):
    assert main(["online", "solve", "--store", str(cli_store), "--hl", "21", "--hr", "3",
                 "--dims", "5,7"]) == 0
    assert "ranks=(5, 7)" in capsys.readouterr().out
    assert main(["online", "solve", "--store", str(cli_store), "--hl", "21", "--hr", "3",
                 "--method", "pod", "--dims", "4,4"]) == 0
    assert main(["online", "solve", "--store", str(cli_store), "--hl", "21", "--hr", "3",
                 "--method", "interp", "--p", "3"]) == 0


def test_online_solve_outside_box(cli_store, capsys):
    assert main(["online", "solve", "--store", str(cli_store), "--hl", "30", "--hr", "3"]) == 2
    assert "box" in capsys.readouterr().err


def test_training_node_solve_is_accurate(cli_store):
    ctx = ex.OnlineContext.open(cli_store)
    _, _, mu = list(ctx.grid.pairs())[5]
    assert ctx.solve(mu).report.e_l2l2 <= 1e-2


def test_pod_requires_dims(cli_store):
    ctx = ex.OnlineContext.open(cli_store)
    with pytest.raises(ValidationError):
        ctx.solve((20, 2), "pod")


def test_reference_cache_reuses_runs(tmp_path, monkeypatch):
    cfg = RunConfig(Nx=40, T=0.2, n_snapshots=5)
    cache = ex.ReferenceCache(tmp_path)
    a = cache.get((15, 2), cfg)
    monkeypatch.setattr(ex, "run_fom", lambda *a, **k: pytest.fail("recomputed"))
    b = ex.ReferenceCache(tmp_path).get(ParameterPair(15, 2), cfg)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.times, b.times)


SWEEP_ARGS = ["--grid", "3x3", "--nx", "60", "--t-final", "0.5", "--n-snapshots", "11"]


def test_sweep_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["sweep", "table6", "--store", str(tmp_path / "ws"), "--mc-samples", "5", *SWEEP_ARGS]
    assert main([*args, "--out", str(out1)]) == 0
    assert main([*args, "--out", str(out2), "--workers", "2"]) == 0
    assert out1.read_text() == out2.read_text()
    prov, rows = _csv(out1)
    assert [r["label"] for r in rows] == ["tROM", "POD"]
    assert rows[1]["dims"] == "match:tROM" and rows[0]["seed"] == "0"
    assert rows[0]["manifest_hash"] in prov["manifest_hash"]
    _, pts = _csv(tmp_path / "a_points.csv")
    assert len(pts) == 10
    trom = {(p["hL"], p["hR"]): (p["l_h"], p["l_q"]) for p in pts if p["label"] == "tROM"}
    pod = {(p["hL"], p["hR"]): (p["l_h"], p["l_q"]) for p in pts if p["label"] == "POD"}
    assert trom == pod


def test_sweep_hr_sweep_preset(tmp_path):
    out = tmp_path / "t5.csv"
    assert main(["sweep", "table5", "--store", str(tmp_path / "ws"), "--out", str(out),
                 "--n-eval", "4", *SWEEP_ARGS]) == 0
    _, rows = _csv(out)
    assert {r["label"] for r in rows} == {"tROM-interp", "tROM-noninterp"}
    assert all(r["rule"] == "trapezoid" and r["count"] == "4" for r in rows)


def test_sweep_failures_become_flagged_rows(tmp_path, monkeypatch):
    preset = ex.customize(ex.PRESETS["table2"], grid=(3, 3))
    real = ex.OnlineContext.solve

    def sometimes(self, mu, method="noninterp", eps_loc=4e-3, dims=None, p=2):
        if dims is not None:
            raise ex.NumericalError("synthetic failure")
        return real(self, mu, method, eps_loc, dims, p)

    monkeypatch.setattr(ex.OnlineContext, "solve", sometimes)
    cfg = RunConfig(Nx=60, T=0.5, n_snapshots=11)
    res = ex.run_sweep(preset, tmp_path / "ws", cfg)
    fixed = [r for r in res.points if r["label"] == "fixed"]
    assert len(fixed) == 9 and all(r["status"] == "error" for r in fixed)
    summary = {r["label"]: r for r in res.summary}
    assert summary["fixed"]["failed"] == 9 and summary["adaptive"]["count"] == 9


def test_presets_are_valid_data():
    assert set(ex.PRESETS) == {"threshold", "table2", "table4", "table5", "table6", "table7"}
    t4 = ex.PRESETS["table4"]
    assert {(t.n_R, t.hR_kind) for t in t4.trainings} == {
        (n, k) for n in (5, 9, 17) for k in ("chebyshev", "uniform")}
    assert len(t4.evaluation.params()) == 80
    t6 = ex.PRESETS["table6"]
    assert t6.evaluation.n == 64 and len(t6.evaluation.params()) == 64


def test_preset_validation():
    with pytest.raises(ValidationError):
        ex.ExperimentPreset("bad", "", (ex.TrainingSpec(3, 3),),
                            ex.EvalSpec("points", points=((30.0, 1.0),)),
                            (ex.MethodSpec("a", "noninterp"),))
    with pytest.raises(ValidationError):
        ex.ExperimentPreset("bad", "", (ex.TrainingSpec(3, 3),), ex.EvalSpec("mc", n=3),
                            (ex.MethodSpec("p", "pod"),))


def test_customize_overrides():
    p = ex.customize(ex.PRESETS["table4"], grid=(7, 9), n_eval=20, eps_loc=1e-3)
    assert {(t.n_L, t.n_R) for t in p.trainings} == {(7, 9)}
    assert len(p.trainings) == 2 and p.evaluation.n == 20
    assert all(m.eps_loc == 1e-3 for m in p.methods)
    q = ex.customize(ex.PRESETS["table6"], mc_samples=10, seed=3, dims=(20, 30))
    assert q.evaluation.n == 10 and q.evaluation.seed == 3
    assert all(m.dims == (20, 30) and m.match is None for m in q.methods)
    with pytest.raises(ValidationError):
        ex.customize(ex.PRESETS["table6"], method="pod")
    r = ex.customize(ex.PRESETS["table4"], hr_nodes="uniform")
    assert {t.hR_kind for t in r.trainings} == {"uniform"} and len(r.trainings) == 3
