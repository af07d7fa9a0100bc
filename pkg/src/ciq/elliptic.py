"""Complete elliptic integrals and Jacobi elliptic functions in real arithmetic.

Only what the square-root quadrature rule needs: K(k) by the
arithmetic-geometric mean, (sn, cn, dn) by the descending Landen / AGM
scheme, and the imaginary-argument values expressed through the
complementary modulus so that callers never touch complex numbers.
"""
from dataclasses import dataclass
import math

AGM_TOL = 1e-15
AGM_MAX_ITER = 50
LANDEN_MAX_DEPTH = 64
POLE_TOL = 1e-12


class EllipticDomainError(ValueError):
    """Modulus outside [0, 1)."""


class EllipticSingularityError(ArithmeticError):
    """Argument too close to a pole of the requested function."""


def _check_modulus(k):
    if not (0.0 <= k < 1.0) or math.isnan(k):
        raise EllipticDomainError(f"elliptic modulus must lie in [0, 1), got {k!r}")


def agm(a, b):
    """Arithmetic-geometric mean of two nonnegative numbers."""
    if a < 0 or b < 0:
        raise ValueError("agm needs nonnegative arguments")
    if b == 0.0 or a == 0.0:
        return 0.0
    for _ in range(AGM_MAX_ITER):
        if abs(a - b) <= AGM_TOL * a:
            return 0.5 * (a + b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    raise RuntimeError("AGM iteration did not converge")  # pragma: no cover


def complete_elliptic_k(k):
    """Complete elliptic integral of the first kind K(k), modulus convention.

    Uses K(k) = pi / (2 agm(1, k')) with k' = sqrt(1 - k^2).

    Raises
    ------
    EllipticDomainError
        If k is not in [0, 1).
    """
    _check_modulus(k)
    return _k_from_complement(math.sqrt((1.0 - k) * (1.0 + k)))


def _k_from_complement(kc):
    # K as a function of the complementary modulus; exact for tiny kc where
    # forming sqrt(1 - k^2) from k would cancel.
    return math.pi / (2.0 * agm(1.0, kc))


@dataclass(frozen=True)
class EllipticModulus:
    """A modulus together with its complement and both quarter periods.

    ``K_k`` is K(k); ``K_kprime`` is K'(k) = K(k').
    """

    k: float
    k_prime: float
    K_k: float
    K_kprime: float

    @classmethod
    def from_k(cls, k):
        _check_modulus(k)
        kp = math.sqrt((1.0 - k) * (1.0 + k))
        return cls(k, kp, _k_from_complement(kp), _k_from_complement(k))

    @classmethod
    def from_condition_number(cls, kappa):
        """Modulus k = 1/sqrt(kappa), computing k' without cancellation."""
        if not kappa > 1.0:
            raise EllipticDomainError(f"condition number must exceed 1, got {kappa!r}")
        k = 1.0 / math.sqrt(kappa)
        kp = math.sqrt((kappa - 1.0) / kappa)
        return cls(k, kp, _k_from_complement(kp), _k_from_complement(k))


def _ellipj(u, k, kc):
    """sn, cn, dn at modulus k whose complement kc = sqrt(1-k^2) is given.

    Descending Landen transformation (A&S 16.4). ``k`` may equal 1 here
    (kc == 0), which the hyperbolic limit handles.
    """
    if kc == 0.0:
        s = 1.0 / math.cosh(u)
        return math.tanh(u), s, s
    if k == 0.0:
        return math.sin(u), math.cos(u), 1.0

    a = [1.0]
    c = [k]
    b = kc
    for _ in range(LANDEN_MAX_DEPTH):
        if abs(c[-1]) <= AGM_TOL * a[-1]:
            break
        an = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = math.sqrt(a[-1] * b)
        a.append(an)
    else:  # pragma: no cover
        raise RuntimeError("Landen recursion exceeded its depth cap")

    n = len(a) - 1
    phi = (2.0**n) * a[n] * u
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + math.asin(c[j] / a[j] * math.sin(phi)))
    sn = math.sin(phi)
    cn = math.cos(phi)
    # dn^2 = k'^2 + k^2 cn^2 is free of cancellation; dn > 0 for real u.
    dn = math.sqrt(kc * kc + k * k * cn * cn)
    return sn, cn, dn


def jacobi_elliptic(u, k):
    """Jacobi elliptic functions (sn, cn, dn) of real argument ``u``.

    Parameters
    ----------
    u : float
        Real argument.
    k : float
        Modulus in [0, 1).

    Returns
    -------
    tuple of float
        ``(sn(u|k), cn(u|k), dn(u|k))``.
    """
    _check_modulus(k)
    if not math.isfinite(u):
        raise ValueError(f"argument must be finite, got {u!r}")
    return _ellipj(u, k, math.sqrt((1.0 - k) * (1.0 + k)))


def jacobi_imaginary(u, k, k_prime=None):
    """Jacobi functions at the imaginary argument ``i*u`` via Jacobi's imaginary transform.

    sn(iu|k) = i sn(u|k')/cn(u|k'), cn(iu|k) = 1/cn(u|k'),
    dn(iu|k) = dn(u|k')/cn(u|k').

    Returns the three real numbers ``(sn(iu|k)/i, cn(iu|k), dn(iu|k))``.
    ``k_prime`` may be supplied when the caller already knows it more
    accurately than sqrt(1 - k^2).

    Raises
    ------
    EllipticSingularityError
        If cn(u|k') is within 1e-12 of zero (a pole of all three).
    """
    _check_modulus(k)
    if k_prime is None:
        k_prime = math.sqrt((1.0 - k) * (1.0 + k))
    sn, cn, dn = _ellipj(u, k_prime, k)
    if abs(cn) < POLE_TOL:
        raise EllipticSingularityError(f"cn(u|k') = {cn:.3e} at u={u!r}: pole of the imaginary transform")
    return sn / cn, 1.0 / cn, dn / cn
