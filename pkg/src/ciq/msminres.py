"""MINRES and multi-shift MINRES for symmetric positive definite operators.

The multi-shift solver runs a single Lanczos recurrence on ``K`` and keeps
one Givens-rotation QR update per shift: the tridiagonal of ``K + t I`` is
the tridiagonal of ``K`` with ``t`` added to its diagonal, so every shifted
system is solved from the same Krylov basis for the cost of one MVM per
iteration. Several right-hand sides are handled as independent recurrences
advanced side by side (no block Krylov).
"""
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 400
DEFAULT_BREAKDOWN_EPS = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule for (multi-shift) MINRES.

    ``tol`` is a relative residual target ``||(K + tI)c - b|| <= tol ||b||``;
    ``breakdown_eps`` flags an invariant Krylov subspace once the Lanczos
    beta drops below ``breakdown_eps * ||b||``. ``verify`` recomputes the
    final residuals explicitly, at one extra MVM per shift.
    """

    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    breakdown_eps: float = DEFAULT_BREAKDOWN_EPS
    verify: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not self.breakdown_eps > 0:
            raise ValueError("breakdown_eps must be positive")


@dataclass
class ShiftedSolveBundle:
    """Solutions of ``(t_q I + K) c = b`` for every shift.

    With a single right-hand side, ``solutions`` has shape (Q, N),
    ``residual_norms`` and ``converged_flags`` shape (Q,) and
    ``iterations``/``mvm_count`` are ints. With a block of m right-hand
    sides every array gains a trailing axis of length m and
    ``iterations``/``mvm_count`` become length-m integer arrays.
    ``residual_norms`` are absolute 2-norms.
    """

    solutions: np.ndarray
    shifts: np.ndarray
    residual_norms: np.ndarray
    converged_flags: np.ndarray
    iterations: object
    mvm_count: object
    rhs_norms: object = field(default=None)

    @property
    def Q(self):
        return len(self.shifts)

    @property
    def converged(self):
        return bool(np.all(self.converged_flags))

    @property
    def relative_residuals(self):
        norms = np.asarray(self.rhs_norms, dtype=float)
        safe = np.where(norms > 0, norms, 1.0)
        return self.residual_norms / safe

    def weighted_sum(self, weights):
        """``sum_q w_q c^(q)``."""
        weights = np.asarray(weights, dtype=float)
        return np.tensordot(weights, self.solutions, axes=(0, 0))


def _msminres_block(op, B, shifts, cfg):
    N, m = B.shape
    Q = len(shifts)
    tq = shifts[:, None]  # (Q, 1) broadcasts against per-column scalars

    beta1 = np.linalg.norm(B, axis=0)
    active = beta1 > 0  # columns still iterating
    X = np.zeros((Q, N, m))
    W = np.zeros((Q, N, m))
    W2 = np.zeros((Q, N, m))
    cs = -np.ones((Q, m))
    sn = np.zeros((Q, m))
    dbar = np.zeros((Q, m))
    epsln = np.zeros((Q, m))
    phibar = np.broadcast_to(beta1, (Q, m)).copy()
    done = np.broadcast_to(~active, (Q, m)).copy()  # per-shift freeze mask
    iters = np.zeros(m, dtype=int)

    r1 = B.copy()
    r2 = B.copy()
    y = B.copy()
    beta = beta1.copy()
    oldb = np.zeros(m)

    for itn in range(1, int(cfg.max_iters) + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        # a plain slice keeps the state updates as views while every column runs
        cols = slice(None) if idx.size == m else idx
        iters[cols] += 1
        # shared Lanczos step on the active columns
        v = y[:, cols] / beta[cols]
        yc = op.matmat(v) if v.shape[1] > 1 else op.apply(v[:, 0])[:, None]
        if itn >= 2:
            yc -= (beta[cols] / oldb[cols]) * r1[:, cols]
        alfa = np.einsum("ij,ij->j", v, yc)
        yc -= (alfa / beta[cols]) * r2[:, cols]
        r1[:, cols] = r2[:, cols]
        r2[:, cols] = yc
        y[:, cols] = yc
        oldb[cols] = beta[cols]
        beta[cols] = np.linalg.norm(yc, axis=0)
        bnew = beta[cols]

        # per-shift QR update, skipped for frozen shifts
        upd = ~done[:, cols]
        alfa_q = alfa[None, :] + tq
        oldeps = epsln[:, cols]
        delta = cs[:, cols] * dbar[:, cols] + sn[:, cols] * alfa_q
        gbar = sn[:, cols] * dbar[:, cols] - cs[:, cols] * alfa_q
        eps_new = sn[:, cols] * bnew
        dbar_new = -cs[:, cols] * bnew
        gamma = np.maximum(np.hypot(gbar, bnew), np.finfo(float).tiny)
        cs_new = gbar / gamma
        sn_new = bnew / gamma
        phi = cs_new * phibar[:, cols]
        phibar_new = sn_new * phibar[:, cols]

        if isinstance(cols, slice) and upd.all():
            # fast path: rotate direction buffers by reference
            Wn = W2
            Wn *= -oldeps[:, None, :]
            Wn -= delta[:, None, :] * W
            Wn += v[None]
            Wn /= gamma[:, None, :]
            W2, W = W, Wn
            X += phi[:, None, :] * Wn
        else:
            Wc, W2c = W[:, :, cols], W2[:, :, cols]
            Wn = (v[None] - oldeps[:, None, :] * W2c - delta[:, None, :] * Wc) / gamma[:, None, :]
            mask = upd[:, None, :]
            W2[:, :, cols] = np.where(mask, Wc, W2c)
            W[:, :, cols] = np.where(mask, Wn, Wc)
            X[:, :, cols] += np.where(mask, phi[:, None, :] * Wn, 0.0)

        epsln[:, cols] = np.where(upd, eps_new, oldeps)
        dbar[:, cols] = np.where(upd, dbar_new, dbar[:, cols])
        cs[:, cols] = np.where(upd, cs_new, cs[:, cols])
        sn[:, cols] = np.where(upd, sn_new, sn[:, cols])
        phibar[:, cols] = np.where(upd, phibar_new, phibar[:, cols])

        rel = phibar[:, cols] / beta1[cols]
        newly = upd & (rel <= cfg.tol)
        d = done[:, cols] | newly
        breakdown = bnew < cfg.breakdown_eps * beta1[cols]
        d[:, breakdown] = True
        done[:, cols] = d
        finished = d.all(axis=0)
        active[idx[finished]] = False

    resid = phibar.copy()
    resid[:, beta1 == 0] = 0.0
    conv = done | (resid <= cfg.tol * beta1[None, :])
    return X, resid, conv, iters, beta1


def msminres(op, b, shifts, cfg=None):
    """Solve ``(t_q I + K) c = b`` for all shifts from one Krylov subspace.

    Parameters
    ----------
    op : LinearOperator
        Symmetric positive definite ``K``.
    b : ndarray, shape (N,) or (N, m)
        Right-hand side(s). Columns of a block are solved independently.
    shifts : sequence of float
        Positive shifts ``t_q``.
    cfg : SolverConfig, optional

    Returns
    -------
    ShiftedSolveBundle
        Iteration stops, per right-hand side, once every shift has relative
        residual at most ``cfg.tol``, on Lanczos breakdown, or after
        ``cfg.max_iters`` steps. Each iteration costs one MVM with ``K``
        whatever the number of shifts. Non-convergence is reported in
        ``converged_flags`` and never raised.
    """
    cfg = cfg or SolverConfig()
    shifts = np.atleast_1d(np.asarray(shifts, dtype=float))
    if shifts.ndim != 1 or shifts.size == 0:
        raise ValueError("need a non-empty 1-D array of shifts")
    if np.any(shifts <= 0) or not np.all(np.isfinite(shifts)):
        raise ValueError(f"shifts must be positive and finite, got min {shifts.min()!r}")
    return _solve(op, b, shifts, cfg)


def _solve(op, b, shifts, cfg):
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    B = b[:, None] if single else b
    if B.ndim != 2 or B.shape[0] != op.dim:
        raise ValueError(f"right-hand side has shape {b.shape}, operator dimension is {op.dim}")
    X, resid, conv, iters, beta1 = _msminres_block(op, B, shifts, cfg)
    if cfg.verify:
        for q, t in enumerate(shifts):
            R = op.shifted_apply(t, X[q]) - B
            resid[q] = np.linalg.norm(R, axis=0)
    if single:
        return ShiftedSolveBundle(X[:, :, 0], shifts, resid[:, 0], conv[:, 0],
                                  int(iters[0]), int(iters[0]), float(beta1[0]))
    return ShiftedSolveBundle(X, shifts, resid, conv, iters, iters.copy(), beta1)


def minres(op, b, shift=0.0, cfg=None):
    """Single-shift MINRES for ``(K + shift I) c = b`` from a zero initial guess.

    Returns
    -------
    solution : ndarray
    residual : float
        Recurrence estimate of ``||(K + shift I) c - b||`` (explicit when
        ``cfg.verify``).
    iters : int
    """
    cfg = cfg or SolverConfig()
    if shift < 0:
        raise ValueError(f"shift must be nonnegative, got {shift}")
    bundle = _solve(op, b, np.array([float(shift)]), cfg)
    return bundle.solutions[0], float(bundle.residual_norms[0]), bundle.iterations
