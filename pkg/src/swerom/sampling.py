"""Training grids over the (hL, hR) box and Monte Carlo evaluation samples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .fom import ParameterPair

DEFAULT_BOX = (10.0, 28.0, 0.0, 8.0)
NODE_KINDS = ("uniform", "chebyshev")


def uniform_nodes(vmin, vmax, n):
    """``n`` equispaced nodes from ``vmin`` to ``vmax`` inclusive."""
    if int(n) != n or n < 2:
        raise ValidationError(f"need at least 2 nodes, got {n}")
    if not vmax > vmin:
        raise ValidationError(f"need vmax > vmin, got [{vmin}, {vmax}]")
    i = np.arange(n, dtype=float)
    nodes = vmin + (vmax - vmin) * i / (n - 1)
    nodes[-1] = vmax
    return nodes


def chebyshev_nodes(vmin, vmax, n):
    """Half-Chebyshev nodes clustered toward ``vmin``.

    ``node_j = vmin + (vmax - vmin) (1 - cos(pi j / (2 (n-1))))`` for
    ``j = 0 .. n-1``, so ``j = 0`` gives ``vmin`` and ``j = n-1`` gives ``vmax``.
    For ``vmin = 0`` this is ``vmax (1 - cos(...))``.
    """
    if int(n) != n or n < 2:
        raise ValidationError(f"need at least 2 nodes, got {n}")
    if not vmax > vmin:
        raise ValidationError(f"need vmax > vmin, got [{vmin}, {vmax}]")
    j = np.arange(n, dtype=float)
    nodes = vmin + (vmax - vmin) * (1.0 - np.cos(np.pi * j / (2.0 * (n - 1))))
    # cos(pi/2) is not exactly zero in floating point
    nodes[0], nodes[-1] = vmin, vmax
    return nodes


def make_nodes(kind, vmin, vmax, n):
    if kind == "uniform":
        return uniform_nodes(vmin, vmax, n)
    if kind == "chebyshev":
        return chebyshev_nodes(vmin, vmax, n)
    raise ValidationError(f"unknown node kind {kind!r}; expected one of {NODE_KINDS}")


@dataclass(frozen=True)
class ParameterGrid:
    hL_nodes: np.ndarray
    hR_nodes: np.ndarray
    hR_kind: str = "chebyshev"
    hL_kind: str = "uniform"

    def __post_init__(self):
        for name in ("hL_nodes", "hR_nodes"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim != 1 or v.size < 2:
                raise ValidationError(f"{name} needs at least 2 nodes")
            if np.any(np.diff(v) <= 0):
                raise ValidationError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, v)
        if self.hR_nodes[0] < 0:
            raise ValidationError("hR nodes must be non-negative")
        if not self.hL_nodes[0] > self.hR_nodes[-1]:
            raise ValidationError("every grid pair needs hL > hR (hL_min must exceed hR_max)")

    @classmethod
    def build(cls, n_L, n_R, box=DEFAULT_BOX, hR_kind="chebyshev", hL_kind="uniform"):
        hl_min, hl_max, hr_min, hr_max = box
        return cls(
            hL_nodes=make_nodes(hL_kind, hl_min, hl_max, n_L),
            hR_nodes=make_nodes(hR_kind, hr_min, hr_max, n_R),
            hR_kind=hR_kind,
            hL_kind=hL_kind,
        )

    @property
    def shape(self):
        return (self.hL_nodes.size, self.hR_nodes.size)

    @property
    def box(self):
        return (
            float(self.hL_nodes[0]),
            float(self.hL_nodes[-1]),
            float(self.hR_nodes[0]),
            float(self.hR_nodes[-1]),
        )

    def pairs(self):
        """Yield ``(i, j, ParameterPair)`` over the whole grid, hL-major."""
        for i, hl in enumerate(self.hL_nodes):
            for j, hr in enumerate(self.hR_nodes):
                yield i, j, ParameterPair(float(hl), float(hr))

    def contains(self, mu, atol=1e-12) -> bool:
        hl_min, hl_max, hr_min, hr_max = self.box
        hl, hr = mu.as_tuple() if hasattr(mu, "as_tuple") else mu
        return (hl_min - atol <= hl <= hl_max + atol) and (hr_min - atol <= hr <= hr_max + atol)

    def to_dict(self):
        return {
            "hL_nodes": self.hL_nodes.tolist(),
            "hR_nodes": self.hR_nodes.tolist(),
            "hL_kind": self.hL_kind,
            "hR_kind": self.hR_kind,
            "box": list(self.box),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            hL_nodes=np.array(d["hL_nodes"], dtype=float),
            hR_nodes=np.array(d["hR_nodes"], dtype=float),
            hR_kind=d.get("hR_kind", "chebyshev"),
            hL_kind=d.get("hL_kind", "uniform"),
        )


def monte_carlo_params(box, n, seed=0):
    """``n`` pairs drawn uniformly from ``box``, redrawing any pair with ``hL <= hR``.

    Uses numpy's PCG64 generator, so a fixed ``seed`` gives a fixed sequence.
    """
    hl_min, hl_max, hr_min, hr_max = (float(v) for v in box)
    if int(n) != n or n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}")
    if not (hl_max >= hl_min and hr_max >= hr_min):
        raise ValidationError(f"malformed box {box}")
    if hr_min < 0:
        raise ValidationError("hR range must be non-negative")
    if not hl_max > hr_min:
        raise ValidationError(f"box {box} has no pair with hL > hR")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        hl = hl_min + (hl_max - hl_min) * rng.random()
        hr = hr_min + (hr_max - hr_min) * rng.random()
        if hl > hr:
            out.append(ParameterPair(float(hl), float(hr)))
    return out
