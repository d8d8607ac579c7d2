import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from swerom import experiments as ex
from swerom.errors import StoreIOError, ValidationError
from swerom.fom import RunConfig
from swerom.sampling import ParameterGrid
from swerom.store import SnapshotStore, read_array, read_header, write_array

CFG = RunConfig(Nx=40, T=0.3, n_snapshots=6)


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=4, max_side=6),
                  elements=st.floats(allow_nan=False, width=64)))
def test_array_round_trip_bit_exact(tmp_path_factory, arr):
    path = tmp_path_factory.mktemp("a") / "x.bin"
    write_array(path, arr)
    back = read_array(path)
    assert back.shape == arr.shape
    assert back.tobytes() == np.ascontiguousarray(arr).tobytes()
    assert np.array_equal(read_array(path, mmap=True), arr)


def test_header_layout(tmp_path):
    path = tmp_path / "x.bin"
    write_array(path, np.arange(6.0).reshape(2, 3))
    raw = path.read_bytes()
    assert raw[:4] == b"TROM"
    assert struct.unpack("<II", raw[4:12]) == (1, 2)
    assert struct.unpack("<2Q", raw[12:28]) == (2, 3)
    assert np.frombuffer(raw[28:], "<f8").tolist() == [0, 1, 2, 3, 4, 5]
    assert read_header(path) == (2, 3)


def test_bad_files_raise_store_errors(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(StoreIOError):
        read_array(bad)
    trunc = tmp_path / "t.bin"
    write_array(trunc, np.ones(4))
    trunc.write_bytes(trunc.read_bytes()[:-8])
    with pytest.raises(StoreIOError, match="size"):
        read_array(trunc)
    with pytest.raises(StoreIOError):
        read_array(tmp_path / "missing.bin")
    with pytest.raises(StoreIOError):
        SnapshotStore(tmp_path / "nostore")


def test_mini_grid_store(tmp_path):
    store = ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    assert store.dims == (40, 2, 2, 6)
    assert store.tensor("h").shape == (40, 2, 2, 6)
    assert store.is_complete and not store.is_compressed
    m = store.manifest
    assert m["layout_version"] == 1 and m["dim_order"] == ["space", "hL", "hR", "time"]
    assert m["run_config"]["Nx"] == 40 and m["grid"]["hR_kind"] == "chebyshev"
    assert read_header(store.root / "Q_h.bin") == tuple(m["dims"])


def test_rerun_complete_store_is_idempotent(tmp_path, monkeypatch):
    store = ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    before = {n: (store.root / n).read_bytes() for n in ("Q_h.bin", "Q_q.bin", "times.bin")}

    def boom(*a, **k):
        raise AssertionError("no full-order work expected")

    monkeypatch.setattr(ex, "run_fom", boom)
    ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    assert all((store.root / n).read_bytes() == b for n, b in before.items())


def test_resume_after_interruption(tmp_path, monkeypatch):
    grid = ParameterGrid.build(2, 3)
    full = ex.offline_generate(tmp_path / "full", grid, CFG)
    real = ex.run_fom
    calls = []

    def flaky(mu, config):
        calls.append(mu)
        if len(calls) == 4:
            raise KeyboardInterrupt
        return real(mu, config)

    monkeypatch.setattr(ex, "run_fom", flaky)
    with pytest.raises(KeyboardInterrupt):
        ex.offline_generate(tmp_path / "part", grid, CFG)
    assert len(SnapshotStore(tmp_path / "part").completed) == 3
    monkeypatch.setattr(ex, "run_fom", real)
    part = ex.offline_generate(tmp_path / "part", grid, CFG)
    for n in ("Q_h.bin", "Q_q.bin", "times.bin"):
        assert (part.root / n).read_bytes() == (full.root / n).read_bytes()


def test_parallel_generation_matches_serial(tmp_path):
    grid = ParameterGrid.build(2, 3)
    a = ex.offline_generate(tmp_path / "a", grid, CFG, workers=1)
    b = ex.offline_generate(tmp_path / "b", grid, CFG, workers=2)
    assert (a.root / "Q_h.bin").read_bytes() == (b.root / "Q_h.bin").read_bytes()


def test_existing_store_with_other_config_refused(tmp_path):
    ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    with pytest.raises(ValidationError):
        ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), RunConfig(Nx=50, T=0.3))


def test_compress_records_errors_and_round_trips(tmp_path):
    store = ex.offline_generate(tmp_path / "s", ParameterGrid.build(3, 3), CFG)
    res = ex.offline_compress(store, 1e-4, 1e-3)
    info = store.manifest["tucker"]
    assert info["h"]["eps"] == 1e-4 and info["q"]["eps"] == 1e-3
    assert info["h"]["measured_error"] <= 1e-4 and info["q"]["measured_error"] <= 1e-3
    m = SnapshotStore(store.root).load_tucker("h")
    assert m.ranks == res["h"][0]
    assert (store.root / "tucker_h_core.bin").exists()
    again = ex.offline_compress(store, 1e-4, 1e-3)
    assert again["h"][0] == res["h"][0] and again["q"][0] == res["q"][0]


def test_compress_lossless_ranks(tmp_path):
    store = ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    res = ex.offline_compress(store, 1e-14, 1e-14)
    Q = store.tensor("h")
    for mode, r in enumerate(res["h"][0]):
        unf = np.moveaxis(Q, mode, 0).reshape(Q.shape[mode], -1)
        assert r <= np.linalg.matrix_rank(unf) + 1
    assert res["h"][1] <= 1e-12


def test_compress_needs_complete_store(tmp_path):
    store = SnapshotStore.create(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    with pytest.raises(ValidationError):
        ex.offline_compress(store)
    with pytest.raises(ValidationError):
        store.load_tucker("h")


def test_manifest_hash_changes_with_content(tmp_path):
    store = ex.offline_generate(tmp_path / "s", ParameterGrid.build(2, 2), CFG)
    h1 = store.manifest_hash()
    ex.offline_compress(store)
    assert store.manifest_hash() != h1 and len(h1) == 16
