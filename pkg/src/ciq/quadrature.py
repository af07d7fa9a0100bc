"""Rational quadrature rule for K^{-1/2} and K^{1/2}.

The rule approximates

    K^{-1/2} ~= sum_q w_q (t_q I + K)^{-1},    K^{1/2} ~= K sum_q w_q (t_q I + K)^{-1}

with positive shifts ``t_q`` and positive weights ``w_q`` placed by the
conformal map of Hale, Higham & Trefethen (2008) for the square root.
Nodes cluster near the smallest eigenvalue, so the error depends only
logarithmically on the condition number.
"""
from dataclasses import dataclass
import math

import numpy as np

from .elliptic import EllipticModulus, jacobi_imaginary
from .lanczos import SpectrumEstimate

KAPPA_FLOOR = 1.0 + 1e-8


@dataclass(frozen=True)
class QuadratureRule:
    """Shifts and weights of the square-root rule.

    Attributes
    ----------
    shifts : ndarray, shape (Q,)
        Positive shifts ``t_q``, strictly increasing in q.
    weights : ndarray, shape (Q,)
        Positive weights ``w_q``.
    spectrum : SpectrumEstimate
        Eigenvalue interval the rule was built for.
    modulus : EllipticModulus
        k = 1/sqrt(kappa) with its complement and quarter periods.
    """

    shifts: np.ndarray
    weights: np.ndarray
    spectrum: SpectrumEstimate
    modulus: EllipticModulus

    @property
    def Q(self):
        return len(self.shifts)

    @property
    def kappa(self):
        return max(self.spectrum.kappa, KAPPA_FLOOR)

    def to_table(self):
        """Plain-text ``q t_q w_q`` table, one row per node."""
        lines = [f"# Q={self.Q} lambda_min={self.spectrum.lambda_min:.17g} "
                 f"lambda_max={self.spectrum.lambda_max:.17g} k={self.modulus.k:.17g}",
                 "# q t_q w_q"]
        for q, (t, w) in enumerate(zip(self.shifts, self.weights), start=1):
            lines.append(f"{q} {t:.17g} {w:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_table(cls, text):
        """Inverse of :meth:`to_table`."""
        header = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        header[key] = float(val)
                continue
            _, t, w = line.split()
            rows.append((float(t), float(w)))
        lmin, lmax = header["lambda_min"], header["lambda_max"]
        spectrum = SpectrumEstimate(lmin, lmax, lmin, lmax)
        arr = np.array(rows, dtype=float)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), spectrum,
                   EllipticModulus.from_k(header["k"]))


def build_rule(spectrum, Q):
    """Build the Q-point rule for an operator whose spectrum lies in ``spectrum``.

    With k = 1/sqrt(kappa) and u_q = (q - 1/2)/Q, the nodes of the rule are
    sigma_q^2 = lambda_min sn(i u_q K'(k) | k)^2 and the weights are
    -2 sqrt(lambda_min) K'(k) cn(.) dn(.) / (pi Q). Both are negative reals;
    the rule stores t_q = -sigma_q^2 and w_q = -w~_q. The imaginary-argument
    functions are evaluated through the complementary modulus, so

        t_q = lambda_min (sn/cn)^2,   w_q = 2 sqrt(lambda_min) K'(k) dn / (pi Q cn^2)

    with sn, cn, dn taken at (u_q K'(k) | k').

    Parameters
    ----------
    spectrum : SpectrumEstimate
        Bounds ``lambda_min <= lambda_max`` (both positive). The condition
        number is clamped below at 1 + 1e-8 so scalar multiples of the
        identity still get a valid rule.
    Q : int
        Number of quadrature nodes, at least 1.
    """
    Q = int(Q)
    if Q < 1:
        raise ValueError(f"need at least one quadrature node, got Q={Q}")
    lmin = float(spectrum.lambda_min)
    if not (lmin > 0 and spectrum.lambda_max >= lmin):
        raise ValueError(f"invalid spectrum interval [{lmin}, {spectrum.lambda_max}]")
    kappa = max(spectrum.lambda_max / lmin, KAPPA_FLOOR)
    modulus = EllipticModulus.from_condition_number(kappa)
    Kp = modulus.K_kprime

    shifts = np.empty(Q)
    weights = np.empty(Q)
    scale = 2.0 * math.sqrt(lmin) * Kp / (math.pi * Q)
    for q in range(Q):
        u = (q + 0.5) / Q * Kp
        sn_over_i, cn_i, dn_i = jacobi_imaginary(u, modulus.k, modulus.k_prime)
        shifts[q] = lmin * sn_over_i**2
        weights[q] = scale * cn_i * dn_i
    return QuadratureRule(shifts, weights, spectrum, modulus)


def rational_sqrt_scalar(rule, lam):
    """lambda * sum_q w_q / (t_q + lambda): the rule applied to a 1x1 matrix."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("rational_sqrt_scalar needs positive arguments")
    return lam * np.sum(rule.weights / (rule.shifts + lam[..., None]), axis=-1)


def rational_invsqrt_scalar(rule, lam):
    """sum_q w_q / (t_q + lambda)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("rational_invsqrt_scalar needs positive arguments")
    return np.sum(rule.weights / (rule.shifts + lam[..., None]), axis=-1)


def weight_sum_bound(rule):
    """Upper bound 4 Q log(5 sqrt(kappa)) / (pi sqrt(lambda_min)) on sum_q w_q/t_q."""
    return 4.0 * rule.Q * math.log(5.0 * math.sqrt(rule.kappa)) / (math.pi * math.sqrt(rule.spectrum.lambda_min))


def quadrature_rate(kappa, Q):
    """exp(-2 Q pi^2 / (log kappa + 3)), the geometric rate of the quadrature error."""
    return math.exp(-2.0 * Q * math.pi**2 / (math.log(kappa) + 3.0))
