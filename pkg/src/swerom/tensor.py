"""Dense order-4 tensor algebra and truncated Tucker (HOSVD) compression.

Tensors are plain C-ordered float64 ``numpy`` arrays. Modes are numbered
1..4 as in the usual ``x_m`` notation. The mode-``m`` unfolding puts mode
``m`` on the rows and the remaining modes, in their original order and
row-major, on the columns.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

NDIM = 4


def as_tensor4(t) -> np.ndarray:
    t = np.ascontiguousarray(t, dtype=np.float64)
    if t.ndim != NDIM:
        raise ValidationError(f"expected an order-4 tensor, got ndim={t.ndim}")
    if not np.isfinite(t).all():
        raise ValidationError("tensor has non-finite entries")
    return t


def _check_mode(mode, ndim=NDIM):
    if int(mode) != mode or not 1 <= mode <= ndim:
        raise ValidationError(f"mode must be in 1..{ndim}, got {mode}")
    return int(mode) - 1


def unfold(t, mode):
    """Mode-``mode`` matricization, shape ``(dims[mode], prod(other dims))``."""
    t = np.asarray(t)
    ax = _check_mode(mode, t.ndim)
    return np.moveaxis(t, ax, 0).reshape(t.shape[ax], -1)


def fold(mat, mode, dims):
    """Inverse of :func:`unfold` for a tensor of shape ``dims``."""
    dims = tuple(int(d) for d in dims)
    ax = _check_mode(mode, len(dims))
    moved = (dims[ax],) + dims[:ax] + dims[ax + 1:]
    mat = np.asarray(mat)
    if mat.size != math.prod(moved) or mat.shape[0] != dims[ax]:
        raise ValidationError(f"matrix of shape {mat.shape} cannot fold into {dims}")
    return np.ascontiguousarray(np.moveaxis(mat.reshape(moved), 0, ax))


def mode_product(t, M, mode):
    """Mode-``mode`` product ``t x_mode M``.

    ``M`` has shape ``(r, dims[mode])``; the result has that mode replaced by
    ``r``. A 1D ``M`` is treated as a single row, giving a mode of size 1.
    """
    t = np.asarray(t, dtype=np.float64)
    ax = _check_mode(mode, t.ndim)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[None, :]
    if M.ndim != 2 or M.shape[1] != t.shape[ax]:
        raise ValidationError(
            f"matrix shape {M.shape} incompatible with mode {mode} of size {t.shape[ax]}"
        )
    out = np.tensordot(M, t, axes=(1, ax))
    return np.ascontiguousarray(np.moveaxis(out, 0, ax))


def thin_svd(A):
    """Economy SVD ``A = U diag(s) V^T``; returns ``(U, s, V)``."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValidationError(f"thin_svd needs a matrix, got ndim={A.ndim}")
    if not np.isfinite(A).all():
        raise ValidationError("thin_svd input has non-finite entries")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt.T


def left_singular(A):
    """Left singular vectors and values of ``A`` without forming the right factor.

    For very wide matrices the right factor dominates the cost, so the
    decomposition goes through an orthogonal reduction of ``A^T`` first.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if n > 4 * m:
        # A^T = Q R  ->  A = R^T Q^T, and R^T is m x m
        R = np.linalg.qr(A.T, mode="r")
        U, s, _ = np.linalg.svd(R.T, full_matrices=False)
        return U, s
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return U, s


def tail_rank(s, budget_sq):
    """Smallest rank whose discarded squared singular values sum to at most ``budget_sq``."""
    s2 = np.asarray(s, dtype=float) ** 2
    # tail[k] = sum of s2[k:], tail[len] = 0
    tail = np.concatenate((np.cumsum(s2[::-1])[::-1], [0.0]))
    ok = np.nonzero(tail <= budget_sq)[0]
    return max(int(ok[0]), 1)


@dataclass
class TuckerModel:
    """Core tensor plus one orthonormal factor per mode.

    ``factors`` are ``(W, S1, S2, V)``: space, hL, hR and time.
    """

    core: np.ndarray
    factors: tuple
    eps: float
    discarded: tuple = (0.0, 0.0, 0.0, 0.0)
    norm: float = 0.0
    flags: dict = field(default_factory=dict)

    @property
    def ranks(self):
        return tuple(int(f.shape[1]) for f in self.factors)

    @property
    def dims(self):
        return tuple(int(f.shape[0]) for f in self.factors)

    @property
    def W(self):
        return self.factors[0]

    def error_bound(self) -> float:
        """Relative Frobenius error implied by the discarded singular values."""
        if self.norm == 0:
            return 0.0
        return math.sqrt(sum(self.discarded)) / self.norm


def hosvd_truncate(q, eps) -> TuckerModel:
    """Sequentially truncated HOSVD with relative tolerance ``eps``.

    Modes are processed in order 1..4, each on the partially compressed
    tensor. Mode ``m`` keeps the fewest singular vectors whose discarded
    energy is at most ``eps^2 ||q||^2 / 4``, so the four modes together
    discard at most ``eps^2 ||q||^2`` and ``||q - q~|| <= eps ||q||``.
    """
    q = as_tensor4(q)
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        warnings.warn("HOSVD of a zero tensor; returning a rank-(1,1,1,1) zero model", stacklevel=2)
        factors = tuple(np.eye(n, 1) for n in q.shape)
        return TuckerModel(
            core=np.zeros((1, 1, 1, 1)), factors=factors, eps=eps, norm=0.0,
            flags={"zero_tensor": True},
        )
    budget_sq = (eps * norm) ** 2 / NDIM
    core = q
    factors = []
    discarded = []
    for mode in range(1, NDIM + 1):
        U, s = left_singular(unfold(core, mode))
        r = tail_rank(s, budget_sq)
        discarded.append(float(np.sum(s[r:] ** 2)))
        Ur = np.ascontiguousarray(U[:, :r])
        factors.append(Ur)
        core = mode_product(core, Ur.T, mode)
    return TuckerModel(core=core, factors=tuple(factors), eps=eps,
                       discarded=tuple(discarded), norm=norm)


def reconstruct(model: TuckerModel, order=(1, 2, 3, 4)):
    """Expand a Tucker model back to a full tensor."""
    if sorted(order) != [1, 2, 3, 4]:
        raise ValidationError(f"order must be a permutation of 1..4, got {order}")
    for k, (f, r) in enumerate(zip(model.factors, model.core.shape)):
        if f.shape[1] != r:
            raise ValidationError(f"factor {k + 1} has {f.shape[1]} columns, core has {r}")
    t = model.core
    for mode in order:
        t = mode_product(t, model.factors[mode - 1], mode)
    return t


def relative_error(q, model: TuckerModel) -> float:
    q = np.asarray(q, dtype=np.float64)
    nq = np.linalg.norm(q)
    if nq == 0:
        return 0.0
    return float(np.linalg.norm(q - reconstruct(model)) / nq)
