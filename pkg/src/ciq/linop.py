"""Matrix-free linear operators.

Every solver in the package touches a matrix only through
:meth:`LinearOperator.apply` (or :meth:`~LinearOperator.matmat` for a block
of independent vectors), and every such product is counted, so tests can
assert exact MVM budgets.
"""
import threading

import numpy as np
from scipy import signal, sparse


class DimensionMismatchError(ValueError):
    pass


class UnsupportedOperatorError(TypeError):
    """The operator cannot provide the requested access pattern."""


class LinearOperator:
    """Square operator ``K`` of size ``dim`` defined by its product with vectors.

    Subclasses implement ``_matvec(V)`` for ``V`` of shape ``(dim,)`` or
    ``(dim, m)``. The public entry points validate shapes and bump the MVM
    counter by the number of vectors multiplied.
    """

    def __init__(self, dim, symmetric=True, positive_definite=True):
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"operator dimension must be positive, got {dim}")
        self.dim = dim
        self.symmetric = bool(symmetric)
        self.positive_definite = bool(positive_definite)
        self._mvm_count = 0
        self._lock = threading.Lock()

    @property
    def shape(self):
        return (self.dim, self.dim)

    @property
    def mvm_count(self):
        return self._mvm_count

    def reset_mvm_count(self):
        with self._lock:
            self._mvm_count = 0

    def _count(self, n):
        with self._lock:
            self._mvm_count += n

    def _matvec(self, v):
        raise NotImplementedError

    def _check(self, v, ndim):
        v = np.asarray(v, dtype=float)
        if v.ndim != ndim or v.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"operator has dimension {self.dim} but the input has shape {v.shape}")
        return v

    def apply(self, v):
        """Return ``K v`` for a single vector; counts one MVM."""
        v = self._check(v, 1)
        self._count(1)
        return self._matvec(v)

    def matmat(self, V):
        """Return ``K V`` for a block of column vectors; counts one MVM per column."""
        V = self._check(V, 2)
        self._count(V.shape[1])
        return self._matvec(V)

    def shifted_apply(self, t, v):
        """Return ``(K + t I) v`` using one MVM with ``K``."""
        if t < 0:
            raise ValueError(f"shift must be nonnegative, got {t}")
        v = np.asarray(v, dtype=float)
        out = self.apply(v) if v.ndim == 1 else self.matmat(v)
        return out + t * v

    def __matmul__(self, v):
        v = np.asarray(v)
        return self.apply(v) if v.ndim == 1 else self.matmat(v)

    def diagonal(self):
        raise UnsupportedOperatorError(f"{type(self).__name__} does not expose its diagonal")

    def column(self, i):
        raise UnsupportedOperatorError(f"{type(self).__name__} does not expose single columns")

    def to_dense(self):
        """Dense matrix by probing with the identity. Not counted; test use only."""
        return self._matvec(np.eye(self.dim))

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class IdentityOperator(LinearOperator):
    """``scale * I``."""

    def __init__(self, dim, scale=1.0):
        if scale <= 0:
            raise ValueError("IdentityOperator needs a positive scale")
        super().__init__(dim)
        self.scale = float(scale)

    def _matvec(self, v):
        return self.scale * v

    def diagonal(self):
        return np.full(self.dim, self.scale)

    def column(self, i):
        e = np.zeros(self.dim)
        e[i] = self.scale
        return e


class DenseOperator(LinearOperator):
    """Explicit symmetric matrix."""

    def __init__(self, entries, positive_definite=True, check_symmetric=True):
        entries = np.array(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"DenseOperator needs a square matrix, got shape {entries.shape}")
        if check_symmetric and not np.allclose(entries, entries.T, rtol=1e-12, atol=1e-14 * np.abs(entries).max()):
            raise ValueError("DenseOperator entries are not symmetric")
        super().__init__(entries.shape[0], True, positive_definite)
        self.entries = entries
        self.entries.setflags(write=False)

    def _matvec(self, v):
        return self.entries @ v

    def diagonal(self):
        return np.diag(self.entries).copy()

    def column(self, i):
        return self.entries[:, i].copy()

    def to_dense(self):
        return np.array(self.entries)


def _sqdist(X1, X2):
    d = (X1 * X1).sum(1)[:, None] + (X2 * X2).sum(1)[None, :] - 2.0 * X1 @ X2.T
    return np.maximum(d, 0.0)


KERNELS = ("rbf", "matern52", "matern32")


def kernel_matrix(X1, X2, kernel="rbf", lengthscale=1.0, outputscale=1.0):
    """Cross-covariance block ``k(X1, X2)`` without jitter.

    RBF is ``o^2 exp(-r^2 / (2 l^2))``; the Matern kernels use the usual
    closed forms in ``r / l``.
    """
    X1 = np.atleast_2d(np.asarray(X1, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    d2 = _sqdist(X1, X2) / lengthscale**2
    if kernel == "rbf":
        k = np.exp(-0.5 * d2)
    elif kernel == "matern52":
        r = np.sqrt(5.0 * d2)
        k = (1.0 + r + r * r / 3.0) * np.exp(-r)
    elif kernel == "matern32":
        r = np.sqrt(3.0 * d2)
        k = (1.0 + r) * np.exp(-r)
    else:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    return outputscale * k


class KernelOperator(LinearOperator):
    """Kernel matrix ``k(X, X) + jitter I`` applied block-row by block-row.

    Memory is O(block_size * N); the full matrix is never stored.
    ``jitter`` defaults to ``1e-4 * outputscale``.
    """

    def __init__(self, points, kernel="rbf", lengthscale=1.0, outputscale=1.0,
                 jitter=None, block_size=2048):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
        if lengthscale <= 0 or outputscale <= 0:
            raise ValueError("lengthscale and outputscale must be positive")
        jitter = 1e-4 * outputscale if jitter is None else float(jitter)
        if jitter < 0:
            raise ValueError("jitter must be nonnegative")
        super().__init__(points.shape[0], True, jitter > 0)
        self.points = points
        self.kernel = kernel
        self.lengthscale = float(lengthscale)
        self.outputscale = float(outputscale)
        self.jitter = jitter
        self.block_size = int(block_size)

    def _block(self, rows):
        return kernel_matrix(self.points[rows], self.points, self.kernel,
                             self.lengthscale, self.outputscale)

    def _matvec(self, v):
        out = np.empty_like(v)
        for start in range(0, self.dim, self.block_size):
            rows = slice(start, min(start + self.block_size, self.dim))
            out[rows] = self._block(rows) @ v
        return out + self.jitter * v

    def diagonal(self):
        return np.full(self.dim, self.outputscale + self.jitter)

    def column(self, i):
        col = kernel_matrix(self.points, self.points[i:i + 1], self.kernel,
                            self.lengthscale, self.outputscale)[:, 0]
        col[i] += self.jitter
        return col

    def to_dense(self):
        return kernel_matrix(self.points, self.points, self.kernel, self.lengthscale,
                             self.outputscale) + self.jitter * np.eye(self.dim)


class LowRankPlusDiagOperator(LinearOperator):
    """``F F^T + sigma2 I`` with ``F`` of shape (N, R); O(NR) per product."""

    def __init__(self, factor, diag):
        factor = np.asarray(factor, dtype=float)
        if factor.ndim != 2:
            raise ValueError("factor must be a 2-D array")
        if not diag > 0:
            raise ValueError(f"diagonal level must be positive, got {diag}")
        super().__init__(factor.shape[0])
        self.factor = factor
        self.diag = float(diag)

    def _matvec(self, v):
        return self.factor @ (self.factor.T @ v) + self.diag * v

    def diagonal(self):
        return (self.factor**2).sum(1) + self.diag

    def column(self, i):
        col = self.factor @ self.factor[i]
        col[i] += self.diag
        return col


class FunctionOperator(LinearOperator):
    """Wrap a callable ``matvec(V)`` that accepts (N,) and (N, m) inputs."""

    def __init__(self, dim, matvec, symmetric=True, positive_definite=True, diagonal=None):
        super().__init__(dim, symmetric, positive_definite)
        self._fn = matvec
        self._diag = diagonal

    def _matvec(self, v):
        return self._fn(v)

    def diagonal(self):
        if self._diag is None:
            return super().diagonal()
        return np.asarray(self._diag() if callable(self._diag) else self._diag, dtype=float)


# ---------------------------------------------------------------------------
# Image operators (non-square maps between flattened images)


class ImageMap:
    """Rectangular matrix-free map with an exact adjoint.

    Acts on flattened images (row-major) and on stacks of them (extra
    trailing axis). ``to_sparse`` assembles the same matrix explicitly.
    """

    shape = (0, 0)

    def matvec(self, x):
        raise NotImplementedError

    def rmatvec(self, y):
        raise NotImplementedError

    def to_sparse(self):
        raise NotImplementedError


def _reflect_index(n, pad):
    # Position -> source pixel under half-sample symmetric reflection
    # (d c b a | a b c d | d c b a).
    return np.pad(np.arange(n), pad, mode="symmetric")


class StencilMap(ImageMap):
    """Correlation of an ``n x n`` image with an odd-sized stencil, reflected boundary."""

    def __init__(self, n, stencil):
        stencil = np.asarray(stencil, dtype=float)
        if stencil.ndim != 2 or stencil.shape[0] != stencil.shape[1] or stencil.shape[0] % 2 == 0:
            raise ValueError("stencil must be square with odd side length")
        self.n = int(n)
        self.stencil = stencil
        self.pad = stencil.shape[0] // 2
        if self.pad > self.n:
            raise ValueError("stencil is wider than the image")
        self.shape = (self.n * self.n, self.n * self.n)
        self._idx = _reflect_index(self.n, self.pad)

    def _images(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n * self.n:
            raise DimensionMismatchError(f"expected {self.n * self.n} pixels, got {x.shape[0]}")
        return x.reshape((self.n, self.n) + x.shape[1:])

    def matvec(self, x):
        img = self._images(x)
        padded = img[self._idx][:, self._idx]
        if img.ndim == 2:
            out = signal.correlate2d(padded, self.stencil, mode="valid")
        else:
            out = np.stack([signal.correlate2d(padded[..., j], self.stencil, mode="valid")
                            for j in range(img.shape[2])], axis=-1)
        return out.reshape(x.shape)

    def rmatvec(self, y):
        img = self._images(y)
        m = self.n + 2 * self.pad

        def one(z):
            full = signal.convolve2d(z, self.stencil, mode="full")
            folded = np.zeros((self.n, m))
            np.add.at(folded, self._idx, full)
            out = np.zeros((self.n, self.n))
            np.add.at(out.T, self._idx, folded.T)
            return out

        if img.ndim == 2:
            return one(img).reshape(y.shape)
        return np.stack([one(img[..., j]) for j in range(img.shape[2])], axis=-1).reshape(y.shape)

    def to_sparse(self):
        n, p = self.n, self.pad
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        rows, cols, vals = [], [], []
        for a in range(-p, p + 1):
            for b in range(-p, p + 1):
                src_i = self._idx[ii + a + p]
                src_j = self._idx[jj + b + p]
                rows.append((ii * n + jj).ravel())
                cols.append((src_i * n + src_j).ravel())
                vals.append(np.full(n * n, self.stencil[a + p, b + p]))
        N = n * n
        return sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(N, N)).tocsr()


def subpixel_offsets(factor, n_images):
    """Raster of (row, col) offsets inside a ``factor x factor`` cell, cycled."""
    cell = [(i, j) for i in range(factor) for j in range(factor)]
    return [cell[r % len(cell)] for r in range(n_images)]


class DecimationMap(ImageMap):
    """Stack of ``n_images`` decimations of an ``n_high`` image down to ``n_low``.

    Image ``r`` keeps pixels ``x[dy::f, dx::f]`` where ``(dy, dx)`` is the
    r-th entry of :func:`subpixel_offsets` and ``f = n_high // n_low``.
    """

    def __init__(self, n_high, n_low, n_images):
        if n_low < 1 or n_high % n_low:
            raise ValueError(f"high resolution {n_high} is not a multiple of low resolution {n_low}")
        if n_images < 1:
            raise ValueError("need at least one low-resolution image")
        self.n_high, self.n_low, self.n_images = int(n_high), int(n_low), int(n_images)
        self.factor = self.n_high // self.n_low
        self.offsets = subpixel_offsets(self.factor, self.n_images)
        idx = np.arange(self.n_high**2).reshape(self.n_high, self.n_high)
        f = self.factor
        self._sel = np.concatenate([idx[dy::f, dx::f].ravel() for dy, dx in self.offsets])
        self.shape = (len(self._sel), self.n_high**2)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.shape[1]:
            raise DimensionMismatchError(f"expected {self.shape[1]} pixels, got {x.shape[0]}")
        return x[self._sel]

    def rmatvec(self, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros((self.shape[1],) + y.shape[1:])
        np.add.at(out, self._sel, y)
        return out

    def to_sparse(self):
        m = len(self._sel)
        return sparse.csr_matrix((np.ones(m), (np.arange(m), self._sel)), shape=self.shape)


class ComposedMap(ImageMap):
    """``outer @ inner``."""

    def __init__(self, outer, inner):
        if outer.shape[1] != inner.shape[0]:
            raise DimensionMismatchError(f"cannot compose {outer.shape} with {inner.shape}")
        self.outer, self.inner = outer, inner
        self.shape = (outer.shape[0], inner.shape[1])

    def matvec(self, x):
        return self.outer.matvec(self.inner.matvec(x))

    def rmatvec(self, y):
        return self.inner.rmatvec(self.outer.rmatvec(y))

    def to_sparse(self):
        return (self.outer.to_sparse() @ self.inner.to_sparse()).tocsr()


BLUR_STD = 2.5
BLUR_SIZE = 5
LAPLACIAN_STENCIL = np.array([[1.0, 2.0, 1.0], [2.0, -12.0, 2.0], [1.0, 2.0, 1.0]]) / 12.0


def gaussian_stencil(std=BLUR_STD, size=BLUR_SIZE):
    """Sampled 2-D Gaussian on a ``size x size`` grid, normalized to sum 1."""
    r = np.arange(size) - size // 2
    g = np.exp(-0.5 * (r / std) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


class ImageOperators:
    """Blur ``B``, stacked decimation ``D``, Laplacian ``L`` and ``A = D B``."""

    def __init__(self, n_high, n_low, n_images, blur_std=BLUR_STD):
        self.n_high, self.n_low, self.n_images = int(n_high), int(n_low), int(n_images)
        stencil = gaussian_stencil(blur_std) if blur_std > 0 else np.ones((1, 1))
        self.blur = StencilMap(n_high, stencil)
        self.decimate = DecimationMap(n_high, n_low, n_images)
        self.laplacian = StencilMap(n_high, LAPLACIAN_STENCIL)
        self.A = ComposedMap(self.decimate, self.blur)

    @property
    def n_pixels(self):
        return self.n_high**2

    @property
    def n_observations(self):
        return self.A.shape[0]


def build_image_operators(n_high, n_low, n_images=4, blur_std=BLUR_STD):
    """Blur / decimation / Laplacian operators for super-resolution.

    ``blur_std = 0`` replaces the blur by the identity.

    Raises
    ------
    ValueError
        If ``n_high`` is not divisible by ``n_low``.
    """
    if n_low < 1 or n_high % n_low:
        raise ValueError(f"high resolution {n_high} is not a multiple of low resolution {n_low}")
    return ImageOperators(n_high, n_low, n_images, blur_std)
