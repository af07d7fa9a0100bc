"""Dense reference computations for tests and acceptance runs (N <= ~1024)."""
from dataclasses import dataclass

import numpy as np

from .linop import LinearOperator

POWERS = (0.5, -0.5, -1.0)
DECAYS = ("inv_sqrt", "inv_linear", "inv_square", "exponential")


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class DenseSpectralFactorization:
    """``K = V diag(eigenvalues) V^T`` with ascending eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply_power(self, b, power):
        V = self.eigenvectors
        return V @ (self.eigenvalues[:, None] ** power * (V.T @ np.reshape(b, (len(V), -1)))).reshape(
            (len(V),) + np.shape(b)[1:])

    def matrix_power(self, power):
        V = self.eigenvectors
        return (V * self.eigenvalues**power) @ V.T

    @property
    def lambda_min(self):
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])

    @property
    def kappa(self):
        return self.lambda_max / self.lambda_min


def _dense(K):
    if isinstance(K, LinearOperator):
        return K.to_dense()
    return np.asarray(K, dtype=float)


def spectral_factorization(K, sym_tol=1e-10):
    """Eigendecomposition of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If ``K`` is not symmetric to ``sym_tol`` (relative) or has an
        eigenvalue <= 0; the message names the offending eigenvalue.
    """
    K = _dense(K)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {K.shape}")
    scale = max(np.abs(K).max(), np.finfo(float).tiny)
    if np.abs(K - K.T).max() > sym_tol * scale:
        raise NotPositiveDefiniteError("matrix is not symmetric")
    lam, V = np.linalg.eigh(0.5 * (K + K.T))
    if lam[0] <= 0:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: eigenvalue {lam[0]:.6e} <= 0")
    return DenseSpectralFactorization(lam, V)


def dense_sqrt_apply(K, b, power):
    """``K^power b`` for ``power`` in {+1/2, -1/2, -1} by dense eigendecomposition."""
    if power not in POWERS:
        raise ValueError(f"power must be one of {POWERS}, got {power!r}")
    return spectral_factorization(K).apply_power(np.asarray(b, dtype=float), power)


def spectrum_values(N, decay):
    t = np.arange(1, N + 1, dtype=float)
    if decay == "inv_sqrt":
        return t**-0.5
    if decay == "inv_linear":
        return 1.0 / t
    if decay == "inv_square":
        return t**-2.0
    if decay == "exponential":
        return np.exp(-(t - 1.0))
    raise ValueError(f"unknown decay {decay!r}; expected one of {DECAYS}")


def random_orthogonal(N, rng):
    Qm, R = np.linalg.qr(rng.standard_normal((N, N)))
    return Qm * np.sign(np.diag(R))


def make_spectrum_matrix(N, decay, seed=None):
    """Dense SPD ``Q diag(lambda) Q^T`` with eigenvalues ``lambda_t``, t = 1..N.

    ``decay`` picks lambda_t = t^{-1/2}, 1/t, t^{-2} or e^{-(t-1)}; ``Q`` is
    a seeded random orthogonal matrix.
    """
    N = int(N)
    if N < 2:
        raise ValueError("need N >= 2")
    lam = spectrum_values(N, decay)
    Qm = random_orthogonal(N, np.random.default_rng(seed))
    K = (Qm * lam) @ Qm.T
    return 0.5 * (K + K.T)


def random_spd(N, rng, cond=None):
    """Random SPD matrix; with ``cond`` the eigenvalues are log-spaced in [1, cond]."""
    if cond is None:
        A = rng.standard_normal((N, N))
        return A @ A.T / N + 0.1 * np.eye(N)
    Qm = random_orthogonal(N, rng)
    K = (Qm * np.geomspace(1.0, cond, N)) @ Qm.T
    return 0.5 * (K + K.T)
