"""Matrix square roots and inverse square roots by contour integral quadrature.

``K^{-1/2} b`` is approximated by ``sum_q w_q (t_q I + K)^{-1} b`` and
``K^{1/2} b`` by ``K`` times the same sum. The Q shifted solves share one
Krylov subspace (see :mod:`ciq.msminres`), so the cost is that of a single
linear solve plus a short Lanczos run to bound the spectrum.
"""
from dataclasses import dataclass

import numpy as np

from .lanczos import DEFAULT_ITERS, SpectrumEstimate, estimate_extreme_eigenvalues
from .msminres import ShiftedSolveBundle, SolverConfig, msminres
from .precond import PreconditionedOperator
from .quadrature import QuadratureRule, build_rule

DEFAULT_Q = 8


@dataclass
class CiqOutput:
    """Result of one CIQ application.

    ``result`` has the shape of the right-hand side (a vector, or N x m
    for a block of independent right-hand sides).
    """

    result: np.ndarray
    rule: QuadratureRule
    bundle: ShiftedSolveBundle
    converged: bool

    @property
    def spectrum(self):
        return self.rule.spectrum

    @property
    def iterations(self):
        return self.bundle.iterations


def _as_rhs(b, dim):
    if isinstance(b, (list, tuple)):
        b = np.column_stack([np.asarray(x, dtype=float) for x in b])
    b = np.asarray(b, dtype=float)
    if b.ndim not in (1, 2) or b.shape[0] != dim:
        raise ValueError(f"right-hand side has shape {b.shape}, operator dimension is {dim}")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side contains non-finite values")
    return b


def prepare_rule(op, Q=DEFAULT_Q, spectrum=None, lanczos_iters=DEFAULT_ITERS, seed=0):
    """Quadrature rule for ``op``, estimating its spectrum by Lanczos if needed.

    Callers that apply CIQ repeatedly with one operator should build the
    rule (or the spectrum estimate) once and pass it on.
    """
    if isinstance(spectrum, QuadratureRule):
        return spectrum
    if spectrum is None:
        spectrum = estimate_extreme_eigenvalues(op, iters=lanczos_iters, seed=seed)
    return build_rule(spectrum, Q)


def _solve(op, b, Q, cfg, spectrum, lanczos_iters, seed):
    if not op.symmetric or not op.positive_definite:
        raise ValueError(f"{op!r} is not flagged symmetric positive definite")
    cfg = cfg or SolverConfig()
    b = _as_rhs(b, op.dim)
    rule = prepare_rule(op, Q, spectrum, lanczos_iters, seed)
    bundle = msminres(op, b, rule.shifts, cfg)
    return b, rule, bundle, bundle.weighted_sum(rule.weights)


def invsqrt_apply(op, b, Q=DEFAULT_Q, cfg=None, spectrum=None, lanczos_iters=DEFAULT_ITERS, seed=0):
    """Approximate ``K^{-1/2} b``.

    Parameters
    ----------
    op : LinearOperator
        Symmetric positive definite operator.
    b : ndarray, shape (N,) or (N, m), or list of vectors
        Right-hand side(s); columns are solved independently.
    Q : int
        Number of quadrature nodes.
    cfg : SolverConfig, optional
    spectrum : SpectrumEstimate or QuadratureRule, optional
        Skips the Lanczos estimate (and the rule build, for a rule).
    lanczos_iters, seed
        Length and start-vector seed of the eigenvalue estimate.

    Returns
    -------
    CiqOutput
        Non-convergence of the shifted solves sets ``converged=False``
        rather than raising.
    """
    _, rule, bundle, a = _solve(op, b, Q, cfg, spectrum, lanczos_iters, seed)
    return CiqOutput(a, rule, bundle, bundle.converged)


def sqrt_apply(op, b, Q=DEFAULT_Q, cfg=None, spectrum=None, lanczos_iters=DEFAULT_ITERS, seed=0):
    """Approximate ``K^{1/2} b``; one MVM more than :func:`invsqrt_apply`."""
    _, rule, bundle, a = _solve(op, b, Q, cfg, spectrum, lanczos_iters, seed)
    Ka = op.apply(a) if a.ndim == 1 else op.matmat(a)
    return CiqOutput(Ka, rule, bundle, bundle.converged)


@dataclass
class GradientContraction:
    """Gradient of ``v^T K^{-1/2} b`` with respect to ``K``.

    ``G = -1/2 sum_q w_q (x_q y_q^T + y_q x_q^T)`` where
    ``x_q = (t_q I + K)^{-1} v`` and ``y_q = (t_q I + K)^{-1} b``. It is
    kept in factored form; ``dense()`` assembles it for small N.
    """

    weights: np.ndarray
    x: np.ndarray  # (Q, N) solves against v
    y: np.ndarray  # (Q, N) solves against b

    def matvec(self, u):
        """``G u`` in O(QN)."""
        u = np.asarray(u, dtype=float)
        return -0.5 * (self.weights * (self.y @ u)) @ self.x - 0.5 * (self.weights * (self.x @ u)) @ self.y

    def dense(self):
        wx = self.weights[:, None] * self.x
        G = wx.T @ self.y
        return -0.5 * (G + G.T)

    def contract(self, E):
        """``<G, E> = trace(G^T E)``, the directional derivative along ``E``.

        ``E`` may be a dense array or anything with a ``matvec``/``@``.
        """
        if hasattr(E, "matmat"):
            EY, ETX = E.matmat(self.y.T), E.matmat(self.x.T)  # symmetric operator
        else:
            E = np.asarray(E, dtype=float)
            EY, ETX = E @ self.y.T, E.T @ self.x.T
        s1 = np.einsum("qn,nq->q", self.x, EY)
        s2 = np.einsum("qn,nq->q", self.y, ETX)
        return float(-0.5 * np.sum(self.weights * (s1 + s2)))


def sqrt_backward(op, b, v, rule, cfg=None, forward=None):
    """Gradient contraction for ``v^T K^{-1/2} b`` with respect to ``K``.

    Parameters
    ----------
    rule : QuadratureRule
        The rule from the forward pass.
    forward : ShiftedSolveBundle, optional
        Forward-pass solves ``(t_q I + K)^{-1} b``. When given, only the
        solves against ``v`` are run (one msMINRES call).
    """
    cfg = cfg or SolverConfig()
    b = _as_rhs(b, op.dim)
    v = _as_rhs(v, op.dim)
    if b.ndim != 1 or v.ndim != 1:
        raise ValueError("sqrt_backward takes single vectors b and v")
    if forward is None:
        forward = msminres(op, b, rule.shifts, cfg)
    elif not np.array_equal(forward.shifts, rule.shifts):
        raise ValueError("forward bundle was solved with different shifts than the rule")
    xs = msminres(op, v, rule.shifts, cfg).solutions
    return GradientContraction(np.array(rule.weights), xs, forward.solutions)


def _precond_inner(op, precond, b, Q, cfg, spectrum, lanczos_iters, seed):
    M = PreconditionedOperator(op, precond)
    b = _as_rhs(b, op.dim)
    # P^{-1/2} P^{1/2} b, evaluated as written so the pipeline matches the
    # definition of the rotated roots.
    z = precond.apply_inv_sqrt(precond.apply_sqrt(b))
    return invsqrt_apply(M, z, Q, cfg, spectrum, lanczos_iters, seed)


def precond_sample_rotated(op, precond, b, Q=DEFAULT_Q, cfg=None, spectrum=None,
                           lanczos_iters=DEFAULT_ITERS, seed=0, return_output=False):
    """``R b`` with ``R = K P^{-1/2} (P^{-1/2} K P^{-1/2})^{-1/2}``, so ``R R^T = K``.

    ``R`` is a rotated square root of ``K``: ``R b`` differs from
    ``K^{1/2} b`` but ``R b`` with ``b ~ N(0, I)`` has covariance ``K``.
    ``spectrum`` refers to the preconditioned operator.
    """
    out = _precond_inner(op, precond, b, Q, cfg, spectrum, lanczos_iters, seed)
    z = precond.apply_inv_sqrt(out.result)
    Rb = op.apply(z) if z.ndim == 1 else op.matmat(z)
    return (Rb, out) if return_output else Rb


def precond_whiten_rotated(op, precond, b, Q=DEFAULT_Q, cfg=None, spectrum=None,
                           lanczos_iters=DEFAULT_ITERS, seed=0, return_output=False):
    """``R' b`` with ``R' = P^{-1/2} (P^{-1/2} K P^{-1/2})^{-1/2}``, so ``R' R'^T = K^{-1}``."""
    out = _precond_inner(op, precond, b, Q, cfg, spectrum, lanczos_iters, seed)
    Rb = precond.apply_inv_sqrt(out.result)
    return (Rb, out) if return_output else Rb


__all__ = [
    "CiqOutput", "GradientContraction", "SpectrumEstimate", "invsqrt_apply", "sqrt_apply",
    "sqrt_backward", "precond_sample_rotated", "precond_whiten_rotated", "prepare_rule",
]
