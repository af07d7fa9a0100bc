import numpy as np
import pytest

from ciq.lanczos import SpectrumEstimate, estimate_extreme_eigenvalues, lanczos_factorize
from ciq.linop import DenseOperator, IdentityOperator, KernelOperator
from ciq.oracle import random_spd


def test_identity_single_step():
    fac = lanczos_factorize(IdentityOperator(5), np.arange(1.0, 6.0), 1)
    assert fac.alphas == pytest.approx([1.0])
    assert fac.residual_norm == pytest.approx(0.0, abs=1e-15)


def test_diagonal_exact_ritz():
    op = DenseOperator(np.diag([1.0, 2.0, 3.0]))
    fac = lanczos_factorize(op, np.ones(3), 3)
    assert np.allclose(fac.ritz_values(), [1, 2, 3], atol=1e-10)


def test_full_run_matches_dense(rng):
    K = random_spd(16, rng)
    fac = lanczos_factorize(DenseOperator(K), rng.standard_normal(16), 16)
    assert np.allclose(fac.ritz_values(), np.linalg.eigvalsh(K), atol=1e-8)


def test_factorization_identities(rng):
    K = random_spd(30, rng)
    op = DenseOperator(K)
    fac = lanczos_factorize(op, rng.standard_normal(30), 12)
    V, T = fac.basis, fac.tridiagonal()
    assert np.allclose(V.T @ V, np.eye(12), atol=1e-8)
    R = K @ V - V @ T
    # only the last column carries the residual
    assert np.linalg.norm(R[:, :-1]) <= 1e-8 * np.linalg.norm(K)
    assert np.linalg.norm(R[:, -1]) == pytest.approx(fac.residual_norm, rel=1e-8)


def test_exact_mvm_count(rng):
    op = DenseOperator(random_spd(40, rng))
    estimate_extreme_eigenvalues(op, iters=7, seed=1)
    assert op.mvm_count == 7


def test_zero_start_rejected():
    with pytest.raises(ValueError):
        lanczos_factorize(IdentityOperator(3), np.zeros(3), 2)


def test_scalar_operator_safety_factors():
    est = estimate_extreme_eigenvalues(IdentityOperator(10, 5.0), iters=4, seed=0)
    assert est.lambda_min == pytest.approx(4.95)
    assert est.lambda_max == pytest.approx(5.05)


def test_diag_hundred():
    op = DenseOperator(np.diag(np.arange(1.0, 101.0)))
    est = estimate_extreme_eigenvalues(op, iters=30, seed=3)
    assert est.ritz_min == pytest.approx(1.0, rel=0.01)
    assert est.ritz_max == pytest.approx(100.0, rel=0.01)


@pytest.mark.parametrize("seed", range(4))
def test_ritz_values_interior(seed):
    rng = np.random.default_rng(seed)
    op = KernelOperator(rng.uniform(size=(200, 2)), lengthscale=0.4)
    lam = np.linalg.eigvalsh(op.to_dense())
    est = estimate_extreme_eigenvalues(op, iters=10, seed=seed)
    assert est.ritz_max <= lam[-1] * (1 + 1e-10)
    assert est.ritz_min >= lam[0] * (1 - 1e-10)


def test_spectrum_exact_validation():
    with pytest.raises(ValueError):
        SpectrumEstimate.exact(2.0, 1.0)
    assert SpectrumEstimate.exact(1.0, 4.0).kappa == 4.0
