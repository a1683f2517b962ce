"""Zero-mean GP core: hyperparameter and data containers, Cholesky factorization
with jitter escalation, marginal likelihood (with gradients), and the predictive
posterior.

Targets are standardized to zero mean and unit variance before fitting; all
internal quantities live in standardized units and predictions carry both
standardized and raw-unit fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import kernels

DEFAULT_NOISE_VARIANCE = 1e-6

# Relative diagonal additions (in units of kernel_variance) tried in order when
# the Cholesky factorization fails.
JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4, 1e-2)

_LOG_2PI = np.log(2.0 * np.pi)


class ModelNumericsError(RuntimeError):
    """The surrogate model could not be evaluated numerically.

    Raised when the kernel matrix cannot be factorized even after exhausting
    the jitter ladder, or when an intermediate quantity is non-finite.
    """


@dataclass(frozen=True)
class GpHyperparameters:
    """One realization of the GP hyperparameters.

    ``inv_sq_lengthscales`` are per-dimension inverse squared length scales in
    unit-cube coordinates; ``global_shrinkage`` is the scale that couples them
    under the hierarchical prior (see :mod:`sparsebo.model`).
    """

    kernel_variance: float
    global_shrinkage: float
    inv_sq_lengthscales: np.ndarray
    noise_variance: float = DEFAULT_NOISE_VARIANCE

    def __post_init__(self):
        rho = np.asarray(self.inv_sq_lengthscales, dtype=float)
        object.__setattr__(self, "inv_sq_lengthscales", rho)
        for name in ("kernel_variance", "global_shrinkage", "noise_variance"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be strictly positive and finite, got {v}")
        if rho.ndim != 1 or rho.size == 0:
            raise ValueError("inv_sq_lengthscales must be a nonempty vector")
        if not np.all(np.isfinite(rho)) or np.any(rho < 0.0):
            raise ValueError("inv_sq_lengthscales must be finite and nonnegative")

    @property
    def dim(self) -> int:
        return self.inv_sq_lengthscales.size


@dataclass(frozen=True)
class EvaluationHistory:
    """Collected query points in the unit hypercube and their objective values.

    Standardization (zero mean, unit variance) is recomputed on construction;
    ``y_scale`` falls back to 1 when fewer than two points or zero variance.
    """

    x: np.ndarray
    y_raw: np.ndarray
    y_mean: float = field(init=False)
    y_scale: float = field(init=False)
    y_std: np.ndarray = field(init=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y_raw, dtype=float).ravel()
        if x.shape[0] != y.size:
            raise ValueError(f"got {x.shape[0]} rows of inputs but {y.size} values")
        if y.size == 0:
            raise ValueError("history must contain at least one evaluation")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("inputs and values must be finite")
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError("input rows must lie in the closed unit hypercube")
        mean = float(y.mean())
        scale = float(y.std()) if y.size >= 2 else 0.0
        if scale <= 0.0:
            scale = 1.0
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y_raw", y)
        object.__setattr__(self, "y_mean", mean)
        object.__setattr__(self, "y_scale", scale)
        object.__setattr__(self, "y_std", (y - mean) / scale)

    @property
    def n(self) -> int:
        return self.y_raw.size

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def y_min_std(self) -> float:
        return float(self.y_std.min())

    def append(self, x_new: np.ndarray, y_new: float) -> "EvaluationHistory":
        """New history with one more evaluation (standardization recomputed)."""
        return EvaluationHistory(
            np.vstack([self.x, np.asarray(x_new, dtype=float).reshape(1, -1)]),
            np.append(self.y_raw, float(y_new)),
        )


@dataclass(frozen=True)
class GpFactorization:
    """Cached lower-triangular factor of (K + sigma^2 I) and derived solves.

    Self-contained for prediction: keeps a reference to the training inputs,
    the hyperparameters, and the kernel choice it was built from.
    """

    chol_lower: np.ndarray
    alpha: np.ndarray
    jitter: float
    params: GpHyperparameters
    kernel: str
    x_train: np.ndarray


@dataclass(frozen=True)
class GpPrediction:
    """Predictive mean/variance in raw objective units and standardized units."""

    mean: float
    variance: float
    mean_std: float
    variance_std: float


@dataclass(frozen=True)
class PosteriorSampleSet:
    """Hyperparameter draws with per-draw factorization caches.

    Produced by NUTS (L >= 1 draws) or MAP (a single draw); consumed by the
    acquisition layer, which averages over the draws.
    """

    draws: tuple[GpHyperparameters, ...]
    factorizations: tuple[GpFactorization, ...]
    history: EvaluationHistory
    kernel: str
    diagnostics: dict

    def __post_init__(self):
        if len(self.draws) == 0:
            raise ValueError("sample set must contain at least one draw")
        if len(self.draws) != len(self.factorizations):
            raise ValueError("one factorization per draw required")

    @property
    def num_draws(self) -> int:
        return len(self.draws)

    @property
    def max_jitter(self) -> float:
        return max(f.jitter for f in self.factorizations)


def _noisy_gram(history: EvaluationHistory, params: GpHyperparameters, kernel: str) -> np.ndarray:
    k = kernels.kernel_matrix(
        history.x, params.kernel_variance, params.inv_sq_lengthscales, kernel
    )
    if not np.all(np.isfinite(k)):
        raise ModelNumericsError(f"non-finite kernel matrix for {params}")
    k[np.diag_indices_from(k)] += params.noise_variance
    return k


def _cholesky_with_jitter(gram: np.ndarray, kernel_variance: float, params):
    for rel in JITTER_LADDER:
        jitter = rel * kernel_variance
        try:
            chol = np.linalg.cholesky(
                gram if jitter == 0.0 else gram + jitter * np.eye(gram.shape[0])
            )
            return chol, jitter
        except np.linalg.LinAlgError:
            continue
    # params is formatted lazily: this path is cold, the caller's loop is hot
    raise ModelNumericsError(
        f"factorization failed after jitter escalation up to "
        f"{JITTER_LADDER[-1]:g}*kernel_variance for {params!r}"
    )


def factorize(
    history: EvaluationHistory, params: GpHyperparameters, kernel: str = "rbf"
) -> GpFactorization:
    """Cholesky-factorize K + sigma^2 I, escalating jitter on failure."""
    if params.dim != history.dim:
        raise ValueError(
            f"hyperparameters are {params.dim}-dimensional but history is {history.dim}-dimensional"
        )
    gram = _noisy_gram(history, params, kernel)
    chol, jitter = _cholesky_with_jitter(gram, params.kernel_variance, params)
    alpha = cho_solve((chol, True), history.y_std)
    return GpFactorization(chol, alpha, jitter, params, kernel, history.x)


def marginal_log_likelihood(
    history: EvaluationHistory,
    params: GpHyperparameters,
    kernel: str = "rbf",
    factorization: GpFactorization | None = None,
) -> float:
    """log N(y_std | 0, K + sigma^2 I) via the triangular factorization."""
    fact = factorization if factorization is not None else factorize(history, params, kernel)
    n = history.n
    value = (
        -0.5 * float(history.y_std @ fact.alpha)
        - float(np.log(np.diag(fact.chol_lower)).sum())
        - 0.5 * n * _LOG_2PI
    )
    if not np.isfinite(value):
        raise ModelNumericsError(f"non-finite marginal likelihood for {params}")
    return value


def mll_core(
    x: np.ndarray,
    y_std: np.ndarray,
    kernel_variance: float,
    rho: np.ndarray,
    noise_variance: float,
    kernel: str,
):
    """Raw-array marginal likelihood with gradients; the fitting hot path.

    Returns ``(mll, d/d log kernel_variance, d/d rho, d/d log noise_variance,
    chol_lower, alpha, jitter)``.  Kept free of container construction because
    samplers call it once per leapfrog step.
    """
    n = x.shape[0]
    r2 = kernels.weighted_sq_dists_sym(x, rho)
    k, dk_dr2 = kernels.kernel_and_r2_gradient(r2, kernel_variance, kernel)
    if not np.isfinite(float(k.sum())):
        raise ModelNumericsError("non-finite kernel matrix")
    gram = k + noise_variance * np.eye(n)
    chol, jitter = _cholesky_with_jitter(
        gram, kernel_variance, (kernel_variance, rho, noise_variance)
    )

    # one triangular solve for [y | I] gives alpha and the dense inverse
    rhs = np.empty((n, n + 1))
    rhs[:, 0] = y_std
    rhs[:, 1:] = np.eye(n)
    solved = cho_solve((chol, True), rhs)
    alpha = solved[:, 0]
    w = np.outer(alpha, alpha) - solved[:, 1:]

    mll = (
        -0.5 * float(y_std @ alpha)
        - float(np.log(np.diag(chol)).sum())
        - 0.5 * n * _LOG_2PI
    )
    if not np.isfinite(mll):
        raise ModelNumericsError("non-finite marginal likelihood")

    # d MLL / d theta = 0.5 tr(W dA/dtheta); for rho_d the derivative matrix is
    # (dk/dR2) (x_id - x_jd)^2, expanded without materializing per-dimension
    # distance tensors (W and G are symmetric).
    g = w * dk_dr2
    g_row = g.sum(axis=1)
    gx = g @ x
    grad_rho = (x * x).T @ g_row - np.einsum("id,id->d", x, gx)
    grad_log_kernel_var = 0.5 * float((w * k).sum())
    grad_log_noise_var = 0.5 * noise_variance * float(np.trace(w))
    return mll, grad_log_kernel_var, grad_rho, grad_log_noise_var, chol, alpha, jitter


def mll_value_and_gradients(
    history: EvaluationHistory, params: GpHyperparameters, kernel: str = "rbf"
) -> tuple[float, float, np.ndarray, float, GpFactorization]:
    """Marginal log likelihood and its gradients in one pass.

    Returns ``(mll, d/d log kernel_variance, d/d rho (vector), d/d log
    noise_variance, factorization)``.  The rho gradient is with respect to the
    raw inverse squared length scales; callers chain through their own
    parameterization.
    """
    mll, g_sk2, g_rho, g_s2, chol, alpha, jitter = mll_core(
        history.x,
        history.y_std,
        params.kernel_variance,
        params.inv_sq_lengthscales,
        params.noise_variance,
        kernel,
    )
    fact = GpFactorization(chol, alpha, jitter, params, kernel, history.x)
    return mll, g_sk2, g_rho, g_s2, fact


def predict_std(
    x_star: np.ndarray, factorization: GpFactorization
) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance in standardized units for a batch of points.

    Variance is the latent-function variance (no observation noise), clamped
    at zero from below.
    """
    xq = np.atleast_2d(np.asarray(x_star, dtype=float))
    p = factorization.params
    k_star = kernels.cross_kernel_matrix(
        xq, factorization.x_train, p.kernel_variance, p.inv_sq_lengthscales, factorization.kernel
    )
    mean = k_star @ factorization.alpha
    v = solve_triangular(factorization.chol_lower, k_star.T, lower=True)
    variance = p.kernel_variance - np.einsum("ij,ij->j", v, v)
    np.maximum(variance, 0.0, out=variance)
    return mean, variance


def predict(
    x_star: np.ndarray,
    history: EvaluationHistory,
    params: GpHyperparameters,
    factorization: GpFactorization | None = None,
) -> GpPrediction:
    """Predictive posterior at one point, in raw and standardized units."""
    fact = factorization if factorization is not None else factorize(history, params)
    mean_std, var_std = predict_std(np.asarray(x_star, dtype=float).reshape(1, -1), fact)
    scale = history.y_scale
    return GpPrediction(
        mean=float(mean_std[0]) * scale + history.y_mean,
        variance=float(var_std[0]) * scale * scale,
        mean_std=float(mean_std[0]),
        variance_std=float(var_std[0]),
    )


def build_sample_set(
    history: EvaluationHistory,
    draws: list[GpHyperparameters],
    kernel: str,
    diagnostics: dict | None = None,
) -> PosteriorSampleSet:
    """Factorize each draw and bundle everything the acquisition layer needs."""
    facts = tuple(factorize(history, d, kernel) for d in draws)
    return PosteriorSampleSet(tuple(draws), facts, history, kernel, dict(diagnostics or {}))


def rbf_kernel(x: np.ndarray, y: np.ndarray, params: GpHyperparameters) -> float:
    """Squared-exponential kernel k(x, y) = s_k^2 exp(-0.5 sum_d rho_d (x_d-y_d)^2)."""
    return kernels.pointwise_kernel(
        x, y, params.kernel_variance, params.inv_sq_lengthscales, "rbf"
    )


def matern52_kernel(x: np.ndarray, y: np.ndarray, params: GpHyperparameters) -> float:
    """Matern-5/2 kernel with r^2 = sum_d rho_d (x_d - y_d)^2."""
    return kernels.pointwise_kernel(
        x, y, params.kernel_variance, params.inv_sq_lengthscales, "matern52"
    )
