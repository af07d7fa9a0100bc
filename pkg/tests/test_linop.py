import threading

import numpy as np
import pytest

from ciq.linop import (DimensionMismatchError, DenseOperator, FunctionOperator, IdentityOperator,
                       KernelOperator, LowRankPlusDiagOperator, UnsupportedOperatorError,
                       build_image_operators, gaussian_stencil, kernel_matrix, subpixel_offsets)


def test_counts_and_shapes(rng):
    K = rng.standard_normal((6, 6))
    op = DenseOperator(K + K.T + 12 * np.eye(6))
    op.apply(np.ones(6))
    op.matmat(np.ones((6, 3)))
    op.shifted_apply(2.0, np.ones(6))
    assert op.mvm_count == 5
    with pytest.raises(DimensionMismatchError):
        op.apply(np.ones(5))
    with pytest.raises(ValueError):
        op.shifted_apply(-1.0, np.ones(6))
    op.to_dense()
    assert op.mvm_count == 5
    op.reset_mvm_count()
    assert op.mvm_count == 0


def test_shifted_apply_value():
    op = IdentityOperator(3, 2.0)
    assert np.allclose(op.shifted_apply(0.5, [1.0, 2.0, 3.0]), [2.5, 5.0, 7.5])


def test_counter_is_thread_safe():
    op = IdentityOperator(4)
    v = np.ones(4)

    def work():
        for _ in range(500):
            op.apply(v)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert op.mvm_count == 4000


def test_dense_rejects_asymmetric():
    with pytest.raises(ValueError):
        DenseOperator([[1.0, 2.0], [0.0, 1.0]])


def test_generic_operator_lacks_columns():
    op = FunctionOperator(3, lambda v: 2 * v)
    with pytest.raises(UnsupportedOperatorError):
        op.column(0)
    with pytest.raises(UnsupportedOperatorError):
        op.diagonal()


@pytest.mark.parametrize("kernel", ["rbf", "matern52", "matern32"])
def test_kernel_operator_matches_dense(kernel, rng):
    X = rng.uniform(size=(50, 3))
    op = KernelOperator(X, kernel, lengthscale=0.7, outputscale=2.0, jitter=1e-3, block_size=16)
    K = op.to_dense()
    v = rng.standard_normal((50, 2))
    assert np.allclose(op.matmat(v), K @ v)
    assert np.allclose(op.diagonal(), np.diag(K))
    assert np.allclose(op.column(7), K[:, 7])
    assert np.allclose(K, K.T)


def test_kernel_closed_forms():
    x = np.array([[0.0]])
    y = np.array([[0.5]])
    assert kernel_matrix(x, y, "rbf", 0.5, 3.0)[0, 0] == pytest.approx(3.0 * np.exp(-0.5))
    r = np.sqrt(5.0)
    assert kernel_matrix(x, y, "matern52", 0.5)[0, 0] == pytest.approx((1 + r + r * r / 3) * np.exp(-r))
    r = np.sqrt(3.0)
    assert kernel_matrix(x, y, "matern32", 0.5)[0, 0] == pytest.approx((1 + r) * np.exp(-r))
    with pytest.raises(ValueError):
        kernel_matrix(x, y, "cosine")


def test_low_rank_plus_diag(rng):
    F = rng.standard_normal((10, 3))
    op = LowRankPlusDiagOperator(F, 0.5)
    K = F @ F.T + 0.5 * np.eye(10)
    assert np.allclose(op.to_dense(), K)
    assert np.allclose(op.diagonal(), np.diag(K))
    assert np.allclose(op.column(4), K[:, 4])


# image operators: adjointness and agreement with explicit sparse assembly


def test_gaussian_stencil_normalized():
    g = gaussian_stencil()
    assert g.shape == (5, 5) and g.sum() == pytest.approx(1.0)
    assert np.allclose(g, g.T)


def test_offsets_raster():
    assert subpixel_offsets(2, 5) == [(0, 0), (0, 1), (1, 0), (1, 1), (0, 0)]


@pytest.mark.parametrize("name", ["blur", "laplacian", "decimate", "A"])
def test_adjoint_and_sparse(name, rng):
    ops = build_image_operators(12, 6, 4)
    M = getattr(ops, name)
    S = M.to_sparse().toarray()
    x = rng.standard_normal(M.shape[1])
    y = rng.standard_normal(M.shape[0])
    assert np.allclose(M.matvec(x), S @ x)
    assert np.allclose(M.rmatvec(y), S.T @ y)
    assert M.matvec(x) @ y == pytest.approx(x @ M.rmatvec(y))
    X = rng.standard_normal((M.shape[1], 3))
    assert np.allclose(M.matvec(X), S @ X)


def test_blur_preserves_constants_and_laplacian_kills_them():
    ops = build_image_operators(8, 4)
    one = np.ones(64)
    assert np.allclose(ops.blur.matvec(one), one)
    assert np.allclose(ops.laplacian.matvec(one), 0.0, atol=1e-14)


def test_decimation_shapes():
    ops = build_image_operators(32, 16, 4)
    assert ops.A.shape == (4 * 256, 1024)
    img = np.arange(1024.0)
    low = ops.decimate.matvec(img).reshape(4, 16, 16)
    full = img.reshape(32, 32)
    assert np.array_equal(low[3], full[1::2, 1::2])
    with pytest.raises(ValueError):
        build_image_operators(32, 15)
