"""On-disk snapshot store: manifest plus raw little-endian float64 arrays.

Array file layout::

    b"TROM"            4 bytes magic
    version            uint32 LE
    ndim               uint32 LE
    dims               uint64 LE x ndim
    data               float64 LE, row-major (C order)

Snapshot tensors are stored with dimensions ``(space, hL, hR, time)``.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import StoreIOError, ValidationError
from .fom import RunConfig, Trajectory
from .sampling import ParameterGrid
from .tensor import TuckerModel

MAGIC = b"TROM"
FORMAT_VERSION = 1
LAYOUT_VERSION = 1
MANIFEST = "manifest.json"
DTYPE = np.dtype("<f8")


def header_size(ndim: int) -> int:
    return 12 + 8 * ndim


def _pack_header(dims) -> bytes:
    dims = [int(d) for d in dims]
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(dims)) + struct.pack(f"<{len(dims)}Q", *dims)


def read_header(path):
    path = Path(path)
    try:
        with open(path, "rb") as f:
            head = f.read(12)
            if len(head) < 12 or head[:4] != MAGIC:
                raise StoreIOError(f"{path}: not a TROM array file", path=str(path))
            version, ndim = struct.unpack("<II", head[4:])
            if version != FORMAT_VERSION:
                raise StoreIOError(f"{path}: unsupported array version {version}", path=str(path))
            dims = struct.unpack(f"<{ndim}Q", f.read(8 * ndim))
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc}", path=str(path)) from exc
    return tuple(int(d) for d in dims)


def write_array(path, arr):
    """Write ``arr`` in the TROM array format (atomically, via a temp file)."""
    path = Path(path)
    arr = np.ascontiguousarray(arr, dtype=DTYPE)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(_pack_header(arr.shape))
            f.write(arr.tobytes(order="C"))
        os.replace(tmp, path)
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc}", path=str(path)) from exc


def read_array(path, mmap=False):
    path = Path(path)
    dims = read_header(path)
    offset = header_size(len(dims))
    n = int(np.prod(dims)) if dims else 1
    expected = offset + 8 * n
    try:
        size = path.stat().st_size
    except OSError as exc:
        raise StoreIOError(f"cannot stat {path}: {exc}", path=str(path)) from exc
    if size != expected:
        raise StoreIOError(f"{path}: size {size} does not match header ({expected})", path=str(path))
    if mmap:
        return np.memmap(path, dtype=DTYPE, mode="r", offset=offset, shape=dims)
    with open(path, "rb") as f:
        f.seek(offset)
        data = np.frombuffer(f.read(8 * n), dtype=DTYPE)
    return data.reshape(dims).astype(np.float64)


def allocate_array(path, dims):
    """Create a zero-filled array file of the given shape."""
    path = Path(path)
    try:
        with open(path, "wb") as f:
            f.write(_pack_header(dims))
            f.truncate(header_size(len(dims)) + 8 * int(np.prod(dims)))
    except OSError as exc:
        raise StoreIOError(f"cannot create {path}: {exc}", path=str(path)) from exc


class SnapshotStore:
    """Directory holding the snapshot tensors of one training grid and their compression."""

    def __init__(self, root):
        self.root = Path(root)
        self.manifest = self._read_manifest()

    # -- creation -----------------------------------------------------------

    @classmethod
    def create(cls, root, grid: ParameterGrid, config: RunConfig, seed=None):
        """Open the store at ``root``, creating it if needed.

        An existing store must have been made with the same grid and config.
        """
        root = Path(root)
        if (root / MANIFEST).exists():
            store = cls(root)
            if store.grid.to_dict() != grid.to_dict() or store.config != config:
                raise ValidationError(
                    f"store {root} exists with a different grid or run config"
                )
            return store
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreIOError(f"cannot create store directory {root}: {exc}", path=str(root)) from exc
        dims = (config.Nx, grid.shape[0], grid.shape[1], config.n_snapshots)
        manifest = {
            "layout_version": LAYOUT_VERSION,
            "dim_order": ["space", "hL", "hR", "time"],
            "dims": list(dims),
            "grid": grid.to_dict(),
            "run_config": config.to_dict(),
            "seed": seed,
            "rng": "numpy.PCG64",
            "arrays": {"Q_h": "Q_h.bin", "Q_q": "Q_q.bin", "times": "times.bin"},
            "completed": [],
            "tucker": {},
        }
        for name in ("Q_h", "Q_q"):
            allocate_array(root / manifest["arrays"][name], dims)
        allocate_array(root / "times.bin", (grid.shape[0], grid.shape[1], config.n_snapshots))
        _write_json(root / MANIFEST, manifest)
        return cls(root)

    # -- manifest -----------------------------------------------------------

    def _read_manifest(self):
        path = self.root / MANIFEST
        try:
            with open(path) as f:
                return json.load(f)
        except FileNotFoundError as exc:
            raise StoreIOError(f"no snapshot store at {self.root} (missing {MANIFEST})",
                               path=str(path)) from exc
        except (OSError, json.JSONDecodeError) as exc:
            raise StoreIOError(f"cannot read {path}: {exc}", path=str(path)) from exc

    def save_manifest(self):
        _write_json(self.root / MANIFEST, self.manifest)

    def manifest_hash(self) -> str:
        try:
            return hashlib.sha256((self.root / MANIFEST).read_bytes()).hexdigest()[:16]
        except OSError as exc:
            raise StoreIOError(f"cannot read manifest: {exc}", path=str(self.root)) from exc

    @property
    def grid(self) -> ParameterGrid:
        return ParameterGrid.from_dict(self.manifest["grid"])

    @property
    def config(self) -> RunConfig:
        return RunConfig(**self.manifest["run_config"])

    @property
    def dims(self):
        return tuple(self.manifest["dims"])

    @property
    def completed(self):
        return {tuple(ij) for ij in self.manifest["completed"]}

    @property
    def is_complete(self) -> bool:
        nl, nr = self.grid.shape
        return len(self.completed) == nl * nr

    @property
    def is_compressed(self) -> bool:
        return set(self.manifest.get("tucker", {})) >= {"h", "q"}

    # -- snapshot tensors ---------------------------------------------------

    def _path(self, name):
        return self.root / self.manifest["arrays"][name]

    def write_slice(self, i, j, traj: Trajectory):
        """Store one full-order run at grid index ``(i, j)`` and mark it done."""
        for name, vals in (("Q_h", traj.h), ("Q_q", traj.q)):
            path = self._path(name)
            dims = read_header(path)
            mm = np.memmap(path, dtype=DTYPE, mode="r+", offset=header_size(len(dims)), shape=dims)
            mm[:, i, j, :] = vals.T
            mm.flush()
            del mm
        tpath = self.root / "times.bin"
        tdims = read_header(tpath)
        mm = np.memmap(tpath, dtype=DTYPE, mode="r+", offset=header_size(len(tdims)), shape=tdims)
        mm[i, j, :] = traj.times
        mm.flush()
        del mm
        if (i, j) not in self.completed:
            self.manifest["completed"].append([int(i), int(j)])
            self.manifest["completed"].sort()
        self.save_manifest()

    def tensor(self, var="h", mmap=False):
        if var not in ("h", "q"):
            raise ValidationError(f"unknown variable {var!r}")
        return read_array(self._path(f"Q_{var}"), mmap=mmap)

    def times(self):
        return read_array(self.root / "times.bin")

    # -- Tucker models ------------------------------------------------------

    def save_tucker(self, var, model: TuckerModel, measured_error: float):
        names = ["core", "W", "S1", "S2", "V"]
        files = {}
        for name, arr in zip(names, (model.core,) + tuple(model.factors)):
            fname = f"tucker_{var}_{name}.bin"
            write_array(self.root / fname, arr)
            files[name] = fname
        self.manifest.setdefault("tucker", {})[var] = {
            "eps": model.eps,
            "ranks": list(model.ranks),
            "measured_error": measured_error,
            "discarded": list(model.discarded),
            "norm": model.norm,
            "files": files,
        }
        self.save_manifest()

    def load_tucker(self, var) -> TuckerModel:
        info = self.manifest.get("tucker", {}).get(var)
        if info is None:
            raise ValidationError(f"store {self.root} has no Tucker model for {var!r}; run compress")
        f = info["files"]
        arrs = {k: read_array(self.root / v) for k, v in f.items()}
        return TuckerModel(core=arrs["core"], factors=(arrs["W"], arrs["S1"], arrs["S2"], arrs["V"]),
                           eps=info["eps"], discarded=tuple(info.get("discarded", (0, 0, 0, 0))),
                           norm=info.get("norm", 0.0))

    # -- auxiliary arrays (POD modes, cached reference runs) ----------------

    def aux_path(self, name) -> Path:
        d = self.root / "aux"
        d.mkdir(exist_ok=True)
        return d / name


def _write_json(path, obj):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w") as f:
            json.dump(obj, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise StoreIOError(f"cannot write {path}: {exc}", path=str(path)) from exc
