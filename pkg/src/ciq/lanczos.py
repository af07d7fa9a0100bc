"""Lanczos tridiagonalization and extreme-eigenvalue estimates."""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

DEFAULT_ITERS = 10
LMAX_SAFETY = 1.01
LMIN_SAFETY = 0.99
LMIN_FLOOR = 1e-12
BREAKDOWN_TOL = 1e-12


@dataclass(frozen=True)
class LanczosFactorization:
    """``K V = V T + beta e_j^T``, with ``T = tridiag(betas, alphas, betas)``.

    ``basis`` has shape (N, j); ``alphas`` has length j and ``betas`` has
    length j - 1. ``residual_norm`` is the norm of the next (unused)
    Lanczos vector before normalization.
    """

    basis: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    residual_norm: float

    @property
    def iters(self):
        return len(self.alphas)

    def tridiagonal(self):
        return np.diag(self.alphas) + np.diag(self.betas, 1) + np.diag(self.betas, -1)

    def ritz_values(self):
        return eigh_tridiagonal(self.alphas, self.betas, eigvals_only=True)


@dataclass(frozen=True)
class SpectrumEstimate:
    """Bounds used to build a quadrature rule.

    ``lambda_min``/``lambda_max`` carry safety factors; ``ritz_min`` and
    ``ritz_max`` are the raw extreme Ritz values.
    """

    lambda_min: float
    lambda_max: float
    ritz_min: float
    ritz_max: float

    @property
    def kappa(self):
        return self.lambda_max / self.lambda_min

    @classmethod
    def exact(cls, lambda_min, lambda_max):
        """Interval known in advance (no safety factors)."""
        if not (0 < lambda_min <= lambda_max):
            raise ValueError(f"invalid spectrum interval [{lambda_min}, {lambda_max}]")
        return cls(float(lambda_min), float(lambda_max), float(lambda_min), float(lambda_max))


def lanczos_factorize(op, start, iters, reorthogonalize=True):
    """Run up to ``iters`` Lanczos steps on ``op`` from ``start``.

    Stops early on breakdown, i.e. when the new residual is below
    1e-12 times the largest |alpha| or beta seen so far (a scale of the
    operator, not of the start vector). Full reorthogonalization against
    all previous vectors is applied when ``reorthogonalize`` is set.
    """
    start = np.asarray(start, dtype=float)
    if start.shape != (op.dim,):
        raise ValueError(f"start vector has shape {start.shape}, expected ({op.dim},)")
    nrm = np.linalg.norm(start)
    if nrm == 0:
        raise ValueError("Lanczos start vector is zero")
    iters = max(1, min(int(iters), op.dim))

    V = np.zeros((op.dim, iters))
    alphas, betas = [], []
    v = start / nrm
    v_prev = np.zeros_like(v)
    beta = 0.0
    scale = 0.0
    for j in range(iters):
        V[:, j] = v
        w = op.apply(v) - beta * v_prev
        alpha = float(v @ w)
        w -= alpha * v
        if reorthogonalize:
            Vj = V[:, :j + 1]
            for _ in range(2):
                w -= Vj @ (Vj.T @ w)
        alphas.append(alpha)
        beta = float(np.linalg.norm(w))
        scale = max(scale, abs(alpha), beta)
        if j == iters - 1 or beta <= BREAKDOWN_TOL * scale:
            break
        betas.append(beta)
        v_prev, v = v, w / beta
    k = len(alphas)
    return LanczosFactorization(V[:, :k], np.array(alphas), np.array(betas), beta)


def estimate_extreme_eigenvalues(op, iters=DEFAULT_ITERS, seed=None, start=None):
    """Estimate ``[lambda_min, lambda_max]`` of a symmetric positive operator.

    Returns the extreme Ritz values widened by safety factors:
    lambda_max = 1.01 ritz_max and lambda_min = max(0.99 ritz_min, 1e-12 ritz_max).

    Parameters
    ----------
    op : LinearOperator
    iters : int
        Lanczos steps; each costs one MVM. Capped at the operator dimension.
    seed : int or numpy Generator, optional
        Source of the random start vector when ``start`` is not given.
    start : ndarray, optional
        Explicit start vector.
    """
    if start is None:
        start = np.random.default_rng(seed).standard_normal(op.dim)
    fac = lanczos_factorize(op, start, iters)
    ritz = fac.ritz_values()
    rmin, rmax = float(ritz[0]), float(ritz[-1])
    if rmax <= 0:
        raise ValueError(f"operator does not look positive definite (largest Ritz value {rmax:.3e})")
    lmax = LMAX_SAFETY * rmax
    lmin = max(LMIN_SAFETY * rmin, LMIN_FLOOR * rmax)
    return SpectrumEstimate(lmin, lmax, rmin, rmax)
