"""One Thompson-sampling step over a finite candidate set.

Joint posterior draws ``f* = mu* + COV*^{1/2} eps`` at the candidates are
produced with CIQ on a matrix-free posterior covariance; each draw votes
for its minimizer.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..ciq import sqrt_apply
from ..linop import KernelOperator, LinearOperator, kernel_matrix
from ..msminres import SolverConfig
from ..oracle import NotPositiveDefiniteError

DIAG_TOL = -1e-8
DEFAULT_Q = 15


@dataclass
class ThompsonProblem:
    """Training data, candidate points and GP hyperparameters.

    ``train_X`` may have zero rows, in which case the posterior is the
    prior. ``noise`` is the observation-noise variance; ``jitter`` is added
    to the candidate covariance and defaults to ``1e-4 * outputscale``.
    """

    train_X: np.ndarray
    train_y: np.ndarray
    candidates: np.ndarray
    kernel: str = "rbf"
    lengthscale: float = 0.2
    outputscale: float = 1.0
    noise: float = 1e-2
    jitter: float = None

    def __post_init__(self):
        self.candidates = np.atleast_2d(np.asarray(self.candidates, dtype=float))
        D = self.candidates.shape[1]
        self.train_X = np.asarray(self.train_X, dtype=float).reshape(-1, D)
        self.train_y = np.asarray(self.train_y, dtype=float).ravel()
        if len(self.train_y) != len(self.train_X):
            raise ValueError("train_X and train_y have different lengths")
        if len(self.candidates) < 1:
            raise ValueError("need at least one candidate")
        if not self.noise > 0:
            raise ValueError("noise variance must be positive")
        if self.jitter is None:
            self.jitter = 1e-4 * self.outputscale

    def kern(self, X1, X2):
        return kernel_matrix(X1, X2, self.kernel, self.lengthscale, self.outputscale)


class PosteriorCovarianceOperator(LinearOperator):
    """``K** + jitter I - K*x (Kxx + noise I)^{-1} Kx*``, matrix-free in the candidates.

    The training block is factored densely (n is small). Products with
    ``K**`` go through a :class:`KernelOperator` and are counted on it too.
    """

    def __init__(self, problem):
        p = problem
        self.problem = p
        self.prior = KernelOperator(p.candidates, p.kernel, p.lengthscale, p.outputscale, p.jitter)
        super().__init__(self.prior.dim)
        n = len(p.train_X)
        if n:
            self.Ksx = p.kern(p.candidates, p.train_X)
            self.cho = cho_factor(p.kern(p.train_X, p.train_X) + p.noise * np.eye(n))
            self.solved = cho_solve(self.cho, self.Ksx.T)  # (n, T)
            self.mean = self.Ksx @ cho_solve(self.cho, p.train_y)
        else:
            self.Ksx = np.zeros((self.dim, 0))
            self.solved = np.zeros((0, self.dim))
            self.mean = np.zeros(self.dim)
        self._diag = p.outputscale - np.einsum("tn,nt->t", self.Ksx, self.solved)

    def _matvec(self, v):
        Kv = self.prior._matvec(v)
        return Kv - self.Ksx @ (self.solved @ v)

    def diagonal(self):
        return self._diag + self.problem.jitter

    def column(self, i):
        return self.prior.column(i) - self.Ksx @ self.solved[:, i]

    def check_diagonal(self):
        low = float(self._diag.min())
        if low < DIAG_TOL:
            raise NotPositiveDefiniteError(
                f"posterior covariance has diagonal entry {low:.3e} < 0; increase the jitter or noise")

    def to_dense(self):
        K = self.problem.kern(self.problem.candidates, self.problem.candidates)
        return K + self.problem.jitter * np.eye(self.dim) - self.Ksx @ self.solved


@dataclass
class ThompsonResult:
    indices: np.ndarray  # argmin per sample
    samples: np.ndarray  # (T, n_samples) posterior draws at the candidates
    mean: np.ndarray
    converged: bool
    iterations: np.ndarray


def first_argmin(samples):
    """Column-wise argmin; np.argmin already returns the lowest index on ties."""
    return np.argmin(samples, axis=0)


def thompson_step(problem, n_samples, Q=DEFAULT_Q, cfg=None, seed=0, eps=None, lanczos_iters=10,
                  spectrum=None):
    """Draw ``n_samples`` joint posterior samples and return each one's minimizer.

    Parameters
    ----------
    eps : ndarray (T, n_samples), optional
        Standard-normal draws to use instead of generating them from ``seed``.
    spectrum : SpectrumEstimate or QuadratureRule, optional
        Skips the Lanczos estimate of the covariance spectrum.

    Raises
    ------
    NotPositiveDefiniteError
        If the posterior covariance has a diagonal entry below -1e-8.
    """
    cov = PosteriorCovarianceOperator(problem)
    cov.check_diagonal()
    rng = np.random.default_rng(seed)
    if eps is None:
        eps = rng.standard_normal((cov.dim, int(n_samples)))
    out = sqrt_apply(cov, eps, Q, cfg or SolverConfig(), spectrum=spectrum, lanczos_iters=lanczos_iters,
                     seed=seed)
    samples = cov.mean[:, None] + out.result
    return ThompsonResult(first_argmin(samples), samples, cov.mean, out.converged,
                          np.atleast_1d(out.iterations))


def toy_problem(n_train=8, n_candidates=200, seed=0):
    """Built-in 1-D toy: noisy observations of a two-well function on [0, 1]."""
    rng = np.random.default_rng(seed)
    f = lambda x: np.sin(6.0 * x) + 0.5 * np.cos(17.0 * x) + 0.3 * x  # noqa: E731
    X = rng.uniform(0.0, 1.0, (n_train, 1))
    y = f(X[:, 0]) + 0.05 * rng.standard_normal(n_train)
    cand = np.linspace(0.0, 1.0, n_candidates)[:, None]
    return ThompsonProblem(X, y, cand, lengthscale=0.1, noise=0.05**2)
