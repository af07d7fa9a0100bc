"""Low-rank-plus-diagonal preconditioner from a partial pivoted Cholesky factor.

``P = L L^T + sigma2 I`` with ``L`` of shape (N, R). Because ``P`` is a
rank-R update of a multiple of the identity, its inverse, square root and
inverse square root all cost O(NR) per application:

    P^{p} v = U diag((s^2 + sigma2)^p) U^T v + sigma2^p (v - U U^T v)

with ``L = U diag(s) V^T`` the thin SVD.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .linop import LinearOperator

PIVOT_TOL = 1e-12


def build_pivoted_cholesky(op, rank):
    """Greedy partial pivoted Cholesky factor ``L`` (N x r, r <= rank).

    Each step takes the column of the largest remaining diagonal residual.
    Stops early once that residual drops below 1e-12 times its initial
    maximum. Needs ``op.diagonal()`` and ``op.column(i)``; generic
    MVM-only operators raise :class:`~ciq.linop.UnsupportedOperatorError`.
    Column access does not go through the MVM counter.
    """
    rank = int(rank)
    if rank < 0:
        raise ValueError("rank must be nonnegative")
    d = np.array(op.diagonal(), dtype=float)
    N = len(d)
    rank = min(rank, N)
    L = np.zeros((N, rank))
    if rank == 0:
        return L
    stop = PIVOT_TOL * d.max()
    for j in range(rank):
        i = int(np.argmax(d))
        if d[i] <= stop:
            return L[:, :j].copy()
        col = op.column(i) - L[:, :j] @ L[i, :j]
        L[:, j] = col / np.sqrt(d[i])
        d -= L[:, j] ** 2
        d[i] = 0.0  # exact after pivoting; avoids roundoff re-selection
    return L


def residual_trace(op, factor):
    """``trace(K - L L^T)`` via the diagonal."""
    return float(np.sum(op.diagonal()) - np.sum(factor**2))


@dataclass(frozen=True)
class PivCholPreconditioner:
    """``P = L L^T + sigma2 I`` with cached thin SVD and Woodbury factor."""

    factor: np.ndarray
    sigma2: float
    U: np.ndarray
    s: np.ndarray
    inner_cho: tuple

    @classmethod
    def from_factor(cls, factor, sigma2):
        factor = np.asarray(factor, dtype=float)
        if factor.ndim != 2:
            raise ValueError("factor must be a 2-D array")
        if not sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {sigma2}")
        U, s, _ = np.linalg.svd(factor, full_matrices=False)
        keep = s > 0
        U, s = U[:, keep], s[keep]
        R = factor.shape[1]
        inner = cho_factor(sigma2 * np.eye(R) + factor.T @ factor) if R else None
        return cls(factor, float(sigma2), U, s, inner)

    @property
    def dim(self):
        return self.factor.shape[0]

    @property
    def rank(self):
        return self.factor.shape[1]

    def apply(self, v):
        return self.factor @ (self.factor.T @ v) + self.sigma2 * v

    def apply_inv(self, v):
        if self.rank == 0:
            return v / self.sigma2
        corr = self.factor @ cho_solve(self.inner_cho, self.factor.T @ v)
        return (v - corr) / self.sigma2

    def _power(self, v, p):
        v = np.asarray(v, dtype=float)
        coef = self.U.T @ v
        scale = (self.s**2 + self.sigma2) ** p
        head = self.U @ (scale.reshape((-1,) + (1,) * (v.ndim - 1)) * coef)
        return head + self.sigma2**p * (v - self.U @ coef)

    def apply_sqrt(self, v):
        return self._power(v, 0.5)

    def apply_inv_sqrt(self, v):
        return self._power(v, -0.5)

    def to_dense(self):
        return self.factor @ self.factor.T + self.sigma2 * np.eye(self.dim)


def build_preconditioner(op, rank, sigma2=None):
    """Pivoted-Cholesky preconditioner of rank at most ``rank``.

    ``sigma2`` defaults to the mean residual diagonal trace(K - L L^T)/N,
    floored at 1e-12 times the largest diagonal entry of ``K``, so that
    ``trace(P) = trace(K)``.
    """
    factor = build_pivoted_cholesky(op, rank)
    if sigma2 is None:
        diag = op.diagonal()
        sigma2 = max(residual_trace(op, factor) / len(diag), PIVOT_TOL * float(np.max(diag)))
    return PivCholPreconditioner.from_factor(factor, sigma2)


class PreconditionedOperator(LinearOperator):
    """``M = P^{-1/2} K P^{-1/2}``; each product costs one MVM with ``K``."""

    def __init__(self, op, precond):
        if precond.dim != op.dim:
            raise ValueError(f"preconditioner dimension {precond.dim} != operator dimension {op.dim}")
        super().__init__(op.dim)
        self.op = op
        self.precond = precond

    def _matvec(self, v):
        z = self.precond.apply_inv_sqrt(v)
        Kz = self.op.apply(z) if z.ndim == 1 else self.op.matmat(z)
        return self.precond.apply_inv_sqrt(Kz)

    def to_dense(self):
        Pm = self.precond.apply_inv_sqrt(np.eye(self.dim))
        return Pm @ self.op.to_dense() @ Pm
