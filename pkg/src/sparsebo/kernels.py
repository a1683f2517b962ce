"""Stationary ARD kernels parameterized by per-dimension inverse squared length scales.

Both kernels depend on inputs only through the weighted squared distance
``R2(x, y) = sum_d rho_d * (x_d - y_d)**2``, which makes their derivatives
with respect to ``rho_d`` and ``x_d`` share a single factor ``dk/dR2``:

    dk/d(rho_d) = (dk/dR2) * (x_d - y_d)**2
    dk/d(x_d)   = (dk/dR2) * 2 * rho_d * (x_d - y_d)

All matrix-level helpers exploit this to stay in BLAS-friendly operations.
"""

from __future__ import annotations

import numpy as np

KERNELS = ("rbf", "matern52")

_SQRT5 = np.sqrt(5.0)


def weighted_sq_dists(a: np.ndarray, b: np.ndarray, inv_sq_lengthscales: np.ndarray) -> np.ndarray:
    """Pairwise sum_d rho_d (a_id - b_jd)^2 for row-stacked points, clipped at 0."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    ar = a * inv_sq_lengthscales
    sa = np.einsum("ij,ij->i", ar, a)
    sb = np.einsum("ij,ij->i", b * inv_sq_lengthscales, b)
    r2 = sa[:, None] + sb[None, :] - 2.0 * (ar @ b.T)
    np.maximum(r2, 0.0, out=r2)
    return r2


def weighted_sq_dists_sym(a: np.ndarray, inv_sq_lengthscales: np.ndarray) -> np.ndarray:
    """Symmetric fast path of :func:`weighted_sq_dists` for one point set."""
    ar = a * inv_sq_lengthscales
    sa = np.einsum("ij,ij->i", ar, a)
    r2 = sa[:, None] + sa[None, :] - 2.0 * (ar @ a.T)
    np.maximum(r2, 0.0, out=r2)
    return r2


def kernel_of_sq_dist(r2: np.ndarray, kernel_variance: float, kind: str) -> np.ndarray:
    """Kernel value as a function of the weighted squared distance."""
    if kind == "rbf":
        return kernel_variance * np.exp(-0.5 * r2)
    if kind == "matern52":
        r = np.sqrt(r2)
        return kernel_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)
    raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS}")


def kernel_and_r2_gradient(
    r2: np.ndarray, kernel_variance: float, kind: str
) -> tuple[np.ndarray, np.ndarray]:
    """Return (k, dk/dR2) evaluated elementwise on the squared-distance array.

    dk/dR2 is finite everywhere including R2 = 0 (the Matern factor
    r*(1+sqrt5*r)/(2r) cancels analytically).
    """
    if kind == "rbf":
        k = kernel_variance * np.exp(-0.5 * r2)
        return k, -0.5 * k
    if kind == "matern52":
        r = np.sqrt(r2)
        e = np.exp(-_SQRT5 * r)
        k = kernel_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * e
        dk = -(5.0 / 6.0) * kernel_variance * (1.0 + _SQRT5 * r) * e
        return k, dk
    raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS}")


def kernel_matrix(
    x: np.ndarray, kernel_variance: float, inv_sq_lengthscales: np.ndarray, kind: str
) -> np.ndarray:
    """N x N kernel matrix (noise-free)."""
    return kernel_of_sq_dist(weighted_sq_dists(x, x, inv_sq_lengthscales), kernel_variance, kind)


def cross_kernel_matrix(
    a: np.ndarray,
    b: np.ndarray,
    kernel_variance: float,
    inv_sq_lengthscales: np.ndarray,
    kind: str,
) -> np.ndarray:
    """|a| x |b| cross-kernel matrix."""
    return kernel_of_sq_dist(weighted_sq_dists(a, b, inv_sq_lengthscales), kernel_variance, kind)


def pointwise_kernel(
    x: np.ndarray,
    y: np.ndarray,
    kernel_variance: float,
    inv_sq_lengthscales: np.ndarray,
    kind: str,
) -> float:
    """Scalar kernel value k(x, y); validates matching dimensions."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    rho = np.asarray(inv_sq_lengthscales, dtype=float).ravel()
    if x.shape != y.shape or x.shape != rho.shape:
        raise ValueError(
            f"dimension mismatch: x has {x.size}, y has {y.size}, "
            f"inv_sq_lengthscales has {rho.size} entries"
        )
    r2 = float(np.sum(rho * (x - y) ** 2))
    return float(kernel_of_sq_dist(np.asarray(r2), kernel_variance, kind))
