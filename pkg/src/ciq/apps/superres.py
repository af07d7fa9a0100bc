"""Bayesian image super-resolution by two-block Gibbs sampling.

Model, for a high-resolution image ``x`` (N x N pixels flattened) and K
low-resolution observations stacked in ``y``::

    y | x, g_obs    ~ N(A x, I / g_obs),        A = D B (decimate after blur)
    x | g_prior     ~ N(0, (g_prior L^T L)^+)   L = discrete Laplacian
    g_obs, g_prior  ~ improper flat priors on (0, inf)

The x-conditional is Gaussian with precision ``g_obs A^T A + g_prior L^T L``;
it is sampled as the CG posterior mean plus a CIQ draw ``Lambda^{-1/2} eps``.
The gamma conditionals are Gamma distributions.

Images are simulated and sampled in 0-255 intensity units so that
``g_obs = 1`` corresponds to a noise standard deviation of one gray level.
"""
from dataclasses import dataclass, field
import json
import time

import numpy as np
from scipy.sparse.linalg import LinearOperator as ScipyOperator
from scipy.sparse.linalg import cg

from ..ciq import invsqrt_apply
from ..io import bundled_test_image, read_pgm, write_pgm
from ..linop import BLUR_STD, FunctionOperator, build_image_operators
from ..msminres import SolverConfig

INTENSITY_SCALE = 255.0
CG_TOL = 1e-3
DEFAULT_Q = 15
DEGENERATE_RTOL = 1e-12


class DegenerateScaleError(ArithmeticError):
    """A Gamma conditional would have infinite scale."""


@dataclass
class SuperResModel:
    """Observation and prior operators together with the stacked observations."""

    ops: object  # ImageOperators
    y: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.shape != (self.ops.n_observations,):
            raise ValueError(f"expected {self.ops.n_observations} observed pixels, got {self.y.shape}")
        A = self.ops.A.to_sparse()
        L = self.ops.laplacian.to_sparse()
        # squared column norms give the diagonals of A^T A and L^T L
        self._ata_diag = np.asarray(A.multiply(A).sum(axis=0)).ravel()
        self._ltl_diag = np.asarray(L.multiply(L).sum(axis=0)).ravel()

    @property
    def n_pixels(self):
        return self.ops.n_pixels

    def precision(self, gamma_obs, gamma_prior):
        """``Lambda = g_obs A^T A + g_prior L^T L`` as a counted operator."""
        if not (gamma_obs > 0 and gamma_prior > 0):
            raise ValueError(f"precision needs positive gammas, got {gamma_obs}, {gamma_prior}")
        A, L = self.ops.A, self.ops.laplacian

        def mv(v):
            return gamma_obs * A.rmatvec(A.matvec(v)) + gamma_prior * L.rmatvec(L.matvec(v))

        diag = gamma_obs * self._ata_diag + gamma_prior * self._ltl_diag
        return FunctionOperator(self.n_pixels, mv, diagonal=diag)

    def posterior_mean(self, gamma_obs, gamma_prior, x0=None, tol=CG_TOL):
        """CG solve of ``Lambda m = g_obs A^T y`` with a Jacobi preconditioner."""
        Lam = self.precision(gamma_obs, gamma_prior)
        inv_diag = 1.0 / Lam.diagonal()
        N = self.n_pixels
        Aop = ScipyOperator((N, N), matvec=Lam.apply, dtype=float)
        Mop = ScipyOperator((N, N), matvec=lambda r: inv_diag * r, dtype=float)
        rhs = gamma_obs * self.ops.A.rmatvec(self.y)
        m, info = cg(Aop, rhs, x0=x0, rtol=tol, maxiter=10 * N, M=Mop)
        if info < 0:  # pragma: no cover - scipy signals breakdown this way
            raise RuntimeError("CG breakdown while solving for the posterior mean")
        return m, Lam


@dataclass
class GibbsChainState:
    x: np.ndarray
    gamma_obs: float
    gamma_prior: float
    step_index: int = 0


def gibbs_x_step(model, state, cfg=None, Q=DEFAULT_Q, rng=None, lanczos_iters=10, cg_tol=CG_TOL):
    """Draw ``x ~ N(m, Lambda^{-1})`` given the current gammas.

    The CG solve for ``m`` starts from zero. Starting from ``state.x``
    would carry the previous fluctuation into ``m`` along directions the
    loose CG tolerance never resolves, and the chain then drifts.

    Returns the new image and a dict of diagnostics (solver iterations,
    convergence flag).
    """
    rng = np.random.default_rng(rng)
    cfg = cfg or SolverConfig()
    m, Lam = model.posterior_mean(state.gamma_obs, state.gamma_prior, tol=cg_tol)
    eps = rng.standard_normal(model.n_pixels)
    out = invsqrt_apply(Lam, eps, Q, cfg, lanczos_iters=lanczos_iters,
                        seed=int(rng.integers(2**31)))
    return m + out.result, {"ciq_iterations": int(out.iterations), "ciq_converged": out.converged}


def gibbs_gamma_steps(model, x, rng):
    """Draw ``(g_obs, g_prior)`` from their Gamma conditionals given ``x``.

    g_obs ~ Gamma(1 + K M^2 / 2, scale 2 / ||y - A x||^2) and
    g_prior ~ Gamma(1 + (N^2 - 1) / 2, scale 2 / ||L x||^2).
    """
    r2 = float(np.sum((model.y - model.ops.A.matvec(x)) ** 2))
    l2 = float(np.sum(model.ops.laplacian.matvec(x) ** 2))
    # "zero" is judged relative to the data so that roundoff does not count as signal
    if not r2 > (DEGENERATE_RTOL * np.linalg.norm(model.y)) ** 2:
        raise DegenerateScaleError("observation residual is zero; gamma_obs scale is infinite")
    if not l2 > (DEGENERATE_RTOL * np.linalg.norm(x)) ** 2:
        raise DegenerateScaleError("||L x|| is zero; gamma_prior scale is infinite")
    g_obs = rng.gamma(1.0 + model.ops.n_observations / 2.0, 2.0 / r2)
    g_prior = rng.gamma(1.0 + (model.n_pixels - 1) / 2.0, 2.0 / l2)
    return g_obs, g_prior, r2


def nearest_neighbor_upsample(low, factor):
    return np.kron(low, np.ones((factor, factor)))


def psnr(estimate, truth, peak=INTENSITY_SCALE):
    mse = float(np.mean((np.asarray(estimate) - np.asarray(truth)) ** 2))
    return float("inf") if mse == 0 else 10.0 * np.log10(peak**2 / mse)


@dataclass
class SuperResConfig:
    """Settings for :func:`run_superres`. ``truth_path=None`` uses the bundled 32x32 image."""

    truth_path: str = None
    n_low: int = 16
    n_images: int = 4
    sweeps: int = 300
    burn_in: int = 60
    Q: int = DEFAULT_Q
    tol: float = 1e-4
    max_iters: int = 400
    cg_tol: float = CG_TOL
    noise_gamma: float = 1.0
    blur_std: float = BLUR_STD
    seed: int = 0
    gamma_obs0: float = 1.0
    gamma_prior0: float = 1.0
    out_mean: str = None
    log_path: str = None


@dataclass
class SuperResResult:
    posterior_mean: np.ndarray  # n_high x n_high, 0-255 units
    truth: np.ndarray
    observations: np.ndarray  # n_images x n_low x n_low
    psnr: float
    baseline_psnr: float
    gamma_obs: np.ndarray
    gamma_prior: np.ndarray
    log: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def finite(self):
        return bool(np.all(np.isfinite(self.posterior_mean)))


def simulate_observations(ops, truth, noise_gamma, rng):
    clean = ops.A.matvec(truth.ravel())
    return clean + rng.standard_normal(clean.shape) / np.sqrt(noise_gamma)


def run_superres(config=None, progress=None):
    """Simulate low-resolution data from a truth image and run the Gibbs chain.

    The posterior mean averages the x draws after burn-in. The baseline is
    the nearest-neighbor upsampling of the first (offset (0, 0))
    observation. If ``config.out_mean`` / ``config.log_path`` are set, the
    posterior mean is written as PGM and one JSON line per sweep is logged.
    """
    cfg = config or SuperResConfig()
    if cfg.burn_in >= cfg.sweeps:
        raise ValueError("burn-in must be shorter than the chain")
    truth01 = bundled_test_image() if cfg.truth_path is None else read_pgm(cfg.truth_path)
    if truth01.shape[0] != truth01.shape[1]:
        raise ValueError(f"truth image must be square, got {truth01.shape}")
    n_high = truth01.shape[0]
    ops = build_image_operators(n_high, cfg.n_low, cfg.n_images, cfg.blur_std)
    truth = INTENSITY_SCALE * truth01
    rng = np.random.default_rng(cfg.seed)
    y = simulate_observations(ops, truth, cfg.noise_gamma, rng)
    model = SuperResModel(ops, y)
    obs = y.reshape(cfg.n_images, cfg.n_low, cfg.n_low)
    baseline = nearest_neighbor_upsample(obs[0], ops.decimate.factor)

    solver = SolverConfig(tol=cfg.tol, max_iters=cfg.max_iters)
    state = GibbsChainState(baseline.ravel().copy(), cfg.gamma_obs0, cfg.gamma_prior0)
    acc = np.zeros(model.n_pixels)
    g_obs, g_prior, log = [], [], []
    t0 = time.perf_counter()
    logfh = open(cfg.log_path, "w") if cfg.log_path else None
    try:
        for sweep in range(cfg.sweeps):
            x, diag = gibbs_x_step(model, state, solver, cfg.Q, rng, cg_tol=cfg.cg_tol)
            go, gp, r2 = gibbs_gamma_steps(model, x, rng)
            if not (np.all(np.isfinite(x)) and go > 0 and gp > 0):
                raise FloatingPointError(f"chain left the valid state space at sweep {sweep}")
            state = GibbsChainState(x, go, gp, state.step_index + 1)
            if sweep >= cfg.burn_in:
                acc += x
            g_obs.append(go)
            g_prior.append(gp)
            rec = {"step": state.step_index, "gamma_obs": go, "gamma_prior": gp,
                   "residual": float(np.sqrt(r2)), "solver_iterations": diag["ciq_iterations"],
                   "converged": diag["ciq_converged"]}
            log.append(rec)
            if logfh:
                logfh.write(json.dumps(rec) + "\n")
            if progress:
                progress(rec)
    finally:
        if logfh:
            logfh.close()
    mean = (acc / (cfg.sweeps - cfg.burn_in)).reshape(n_high, n_high)
    if cfg.out_mean:
        write_pgm(cfg.out_mean, mean / INTENSITY_SCALE)
    return SuperResResult(mean, truth, obs, psnr(mean, truth), psnr(baseline, truth),
                          np.array(g_obs), np.array(g_prior), log, time.perf_counter() - t0)
