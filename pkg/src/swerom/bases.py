"""Reduced spatial bases: interpolatory and non-interpolatory tensor bases, and global POD.

Every basis is an ``Nx x l`` matrix with orthonormal columns. Tensor bases
live inside the universal space spanned by the spatial Tucker factor ``W``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .fom import ParameterPair
from .sampling import ParameterGrid
from .tensor import TuckerModel, left_singular, thin_svd

METHODS = ("interp", "noninterp", "pod")
SIGMA_FLOOR = 1e-14


@dataclass(frozen=True)
class InterpolationVector:
    weights: np.ndarray
    support: np.ndarray
    order: int


@dataclass
class LocalBasis:
    Vh: np.ndarray
    Vq: np.ndarray
    mu_star: ParameterPair
    method: str
    sigma_h: np.ndarray | None = None
    sigma_q: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def ranks(self):
        return (self.Vh.shape[1], self.Vq.shape[1])

    @property
    def l_h(self):
        return self.Vh.shape[1]

    @property
    def l_q(self):
        return self.Vq.shape[1]


def normalize_signs(B):
    """Flip columns so each one's largest-magnitude entry is positive."""
    B = np.array(B, dtype=float, copy=True)
    if B.size == 0:
        return B
    idx = np.argmax(np.abs(B), axis=0)
    signs = np.sign(B[idx, np.arange(B.shape[1])])
    signs[signs == 0] = 1.0
    return B * signs


def select_rank(sigma, eps_loc):
    """Smallest ``l`` whose singular-value tail is within ``eps_loc`` of the total.

    Picks the least ``l`` with ``sqrt(sum_{k>l} s_k^2) <= eps_loc * sqrt(sum_k s_k^2)``.
    Values below ``1e-14 * s_1`` are dropped first.
    """
    s = np.asarray(sigma, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValidationError("sigma must be a non-empty 1D array")
    if np.any(s < 0) or np.any(np.diff(s) > 1e-12 * max(s[0], 1.0)):
        raise ValidationError("sigma must be non-negative and non-increasing")
    if not s[0] > 0:
        warnings.warn("all singular values are zero; using rank 1", stacklevel=2)
        return 1
    s = s[s > SIGMA_FLOOR * s[0]]
    s2 = s ** 2
    total = s2.sum()
    tail = np.concatenate((np.cumsum(s2[::-1])[::-1], [0.0]))
    ok = np.nonzero(np.sqrt(tail) <= eps_loc * np.sqrt(total))[0]
    return max(int(ok[0]), 1)


def lagrange_weights(nodes, x_star, p=2) -> InterpolationVector:
    """Lagrange cardinal weights at ``x_star`` over the ``p`` nodes nearest to it.

    Ties in distance go to the node with the smaller index.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    if int(p) != p or not 1 <= p <= n:
        raise ValidationError(f"interpolation order must be in 1..{n}, got {p}")
    tol = 1e-12 * max(1.0, abs(nodes[-1] - nodes[0]))
    if not nodes[0] - tol <= x_star <= nodes[-1] + tol:
        raise ValidationError(
            f"refusing to extrapolate: {x_star} outside [{nodes[0]}, {nodes[-1]}]"
        )
    order = np.lexsort((np.arange(n), np.abs(nodes - x_star)))
    support = np.sort(order[:p])
    w = np.zeros(n)
    xs = nodes[support]
    for a, k in enumerate(support):
        others = np.delete(xs, a)
        w[k] = np.prod((others - x_star) / (others - xs[a]))
    return InterpolationVector(weights=w, support=support, order=int(p))


def bracket(nodes, x_star):
    """Indices ``(low, high)`` of two neighbouring nodes around ``x_star``.

    ``nodes[low] <= x_star < nodes[high]`` in the interior. At the last node
    the pair is ``(n-1, n-2)`` so two distinct nodes are always returned.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    if n < 2:
        raise ValidationError("bracketing needs at least 2 nodes on an axis")
    tol = 1e-12 * max(1.0, abs(nodes[-1] - nodes[0]))
    if not nodes[0] - tol <= x_star <= nodes[-1] + tol:
        raise ValidationError(f"{x_star} outside [{nodes[0]}, {nodes[-1]}]")
    k = int(np.searchsorted(nodes, x_star, side="right")) - 1
    k = min(max(k, 0), n - 1)
    if k == n - 1:
        return n - 1, n - 2
    return k, k + 1


def _contract_params(core, row_l, row_r):
    """Contract the two parameter modes of ``core`` with the given rows."""
    return np.einsum("abcd,b,c->ad", core, row_l, row_r, optimize=True)


def _basis_from_local_core(W, C, eps_loc=None, rank=None):
    U, s, _ = thin_svd(C)
    if rank is None:
        ell = select_rank(s, eps_loc)
    else:
        ell = int(rank)
        if ell < 1:
            raise ValidationError(f"rank must be >= 1, got {rank}")
        if ell > U.shape[1]:
            warnings.warn(f"requested rank {ell} exceeds local core rank {U.shape[1]}; clipping",
                          stacklevel=3)
            ell = U.shape[1]
    return normalize_signs(W @ U[:, :ell]), s


def interp_local_core(model: TuckerModel, grid: ParameterGrid, mu_star, p=2):
    hl, hr = mu_star.as_tuple() if hasattr(mu_star, "as_tuple") else mu_star
    chi_l = lagrange_weights(grid.hL_nodes, hl, p)
    chi_r = lagrange_weights(grid.hR_nodes, hr, p)
    S1, S2 = model.factors[1], model.factors[2]
    return _contract_params(model.core, chi_l.weights @ S1, chi_r.weights @ S2)


def interp_local_basis(model: TuckerModel, grid: ParameterGrid, mu_star, p=2,
                       eps_loc=4e-3, rank=None):
    """Basis from the SVD of the Lagrange-interpolated core at ``mu_star``.

    Returns ``(basis, singular_values)``.
    """
    C = interp_local_core(model, grid, mu_star, p)
    return _basis_from_local_core(model.W, C, eps_loc, rank)


def noninterp_local_core(model: TuckerModel, grid: ParameterGrid, mu_star):
    hl, hr = mu_star.as_tuple() if hasattr(mu_star, "as_tuple") else mu_star
    kl = bracket(grid.hL_nodes, hl)
    lr = bracket(grid.hR_nodes, hr)
    S1, S2 = model.factors[1], model.factors[2]
    blocks = [_contract_params(model.core, S1[k], S2[m]) for k in kl for m in lr]
    return np.hstack(blocks)


def noninterp_local_basis(model: TuckerModel, grid: ParameterGrid, mu_star,
                          eps_loc=4e-3, rank=None):
    """Basis from the SVD of the four bracketing cores placed side by side.

    Returns ``(basis, singular_values)``.
    """
    C = noninterp_local_core(model, grid, mu_star)
    return _basis_from_local_core(model.W, C, eps_loc, rank)


def snapshot_matrix(Q):
    """Flatten a ``(Nx, NL, NR, NT)`` snapshot tensor to ``Nx x (NL NR NT)``."""
    Q = np.asarray(Q)
    return Q.reshape(Q.shape[0], -1)


@dataclass
class PodModes:
    """Left singular vectors and values of a snapshot matrix."""

    U: np.ndarray
    s: np.ndarray

    @classmethod
    def from_snapshots(cls, X):
        X = np.asarray(X, dtype=float)
        if X.size == 0:
            raise ValidationError("empty snapshot matrix")
        if X.ndim == 4:
            X = snapshot_matrix(X)
        U, s = left_singular(X)
        return cls(U=U, s=s)

    @property
    def numerical_rank(self):
        if not self.s.size or self.s[0] == 0:
            return 0
        return int(np.sum(self.s > SIGMA_FLOOR * self.s[0]))

    def energy_rank(self, eps_pod):
        """Smallest ``l`` keeping at least a ``1 - eps_pod`` fraction of the squared energy."""
        s2 = self.s ** 2
        kept = np.cumsum(s2) / s2.sum()
        return int(np.searchsorted(kept, 1.0 - eps_pod - 1e-15) + 1)

    def basis(self, rank=None, eps_pod=None):
        if (rank is None) == (eps_pod is None):
            raise ValidationError("give exactly one of rank or eps_pod")
        ell = self.energy_rank(eps_pod) if rank is None else int(rank)
        if ell < 1:
            raise ValidationError(f"rank must be >= 1, got {ell}")
        nr = max(self.numerical_rank, 1)
        if ell > nr:
            warnings.warn(f"requested POD rank {ell} exceeds matrix rank {nr}; clipping",
                          stacklevel=2)
            ell = nr
        return normalize_signs(self.U[:, :ell])


def pod_global_basis(snapshots, rank=None, eps_pod=None):
    """Leading left singular vectors of the snapshot matrix (fixed rank or energy threshold)."""
    return PodModes.from_snapshots(snapshots).basis(rank=rank, eps_pod=eps_pod)


def build_basis(method, mu_star, *, models=None, grid=None, pod=None, eps_loc=4e-3,
                dims=None, p=2) -> LocalBasis:
    """Depth and discharge bases for ``mu_star`` with the chosen method.

    ``models`` is the ``(h, q)`` pair of Tucker models (tensor methods);
    ``pod`` is the ``(h, q)`` pair of :class:`PodModes`. ``dims`` fixes
    ``(l_h, l_q)`` instead of thresholding at ``eps_loc``; POD always needs
    ``dims``.
    """
    if not isinstance(mu_star, ParameterPair):
        mu_star = ParameterPair(*mu_star)
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
    if method != "pod" and grid is not None and not grid.contains(mu_star):
        raise ValidationError(f"mu*={mu_star.as_tuple()} outside the training box {grid.box}")
    rank_h, rank_q = (None, None) if dims is None else dims

    if method == "pod":
        if pod is None or dims is None:
            raise ValidationError("POD bases need precomputed modes and explicit dims")
        return LocalBasis(Vh=pod[0].basis(rank=rank_h), Vq=pod[1].basis(rank=rank_q),
                          mu_star=mu_star, method="pod")
    if models is None or grid is None:
        raise ValidationError("tensor bases need Tucker models and the training grid")
    if method == "interp":
        Vh, sh = interp_local_basis(models[0], grid, mu_star, p, eps_loc, rank_h)
        Vq, sq = interp_local_basis(models[1], grid, mu_star, p, eps_loc, rank_q)
    else:
        Vh, sh = noninterp_local_basis(models[0], grid, mu_star, eps_loc, rank_h)
        Vq, sq = noninterp_local_basis(models[1], grid, mu_star, eps_loc, rank_q)
    return LocalBasis(Vh=Vh, Vq=Vq, mu_star=mu_star, method=method, sigma_h=sh, sigma_q=sq,
                      info={"eps_loc": eps_loc, "p": p})
