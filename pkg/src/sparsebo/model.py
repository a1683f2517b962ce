"""Hierarchical shrinkage prior over GP hyperparameters, its unconstrained
reparameterization, the log joint density targeted by inference, and
subspace-relevance diagnostics.

The prior places a half-Cauchy(alpha) on a global shrinkage scale tau and
half-Cauchy(tau) on every inverse squared length scale, which is expressed as
rho_i = tau * rho_tilde_i with rho_tilde_i ~ half-Cauchy(1) so that
gradient-based samplers see better-conditioned geometry.  The kernel variance
carries a weak log-Normal(0, 10^2) prior; observation noise is fixed at 1e-6
unless the noisy hook is enabled, in which case it gets the same weak prior.

Inference works in logs of (kernel_variance, tau, rho_tilde_1..D[, noise]);
all densities here include the exp-transform Jacobians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gp, nuts
from .gp import (
    DEFAULT_NOISE_VARIANCE,
    EvaluationHistory,
    GpHyperparameters,
    ModelNumericsError,
    PosteriorSampleSet,
)

_LOG_2_OVER_PI = np.log(2.0 / np.pi)


@dataclass(frozen=True)
class ShrinkagePriorConfig:
    """Prior configuration: global-shrinkage scale alpha plus the noisy hook."""

    alpha: float = 0.1
    kernel_variance_log_scale: float = 10.0
    noisy: bool = False
    noise_log_scale: float = 10.0

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class UnconstrainedState:
    """Log-space coordinates (log s_k^2, log tau, log rho_tilde_1..D[, log s^2]).

    Bijective with :class:`GpHyperparameters` via exponentiation and
    rho_i = tau * rho_tilde_i.
    """

    log_kernel_variance: float
    log_global_shrinkage: float
    log_rho_tilde: np.ndarray
    log_noise_variance: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "log_rho_tilde", np.asarray(self.log_rho_tilde, dtype=float))

    @property
    def dim(self) -> int:
        return self.log_rho_tilde.size

    def to_vector(self) -> np.ndarray:
        head = [self.log_kernel_variance, self.log_global_shrinkage]
        tail = [] if self.log_noise_variance is None else [self.log_noise_variance]
        return np.concatenate([head, self.log_rho_tilde, tail])

    @classmethod
    def from_vector(cls, vec: np.ndarray, noisy: bool = False) -> "UnconstrainedState":
        vec = np.asarray(vec, dtype=float)
        if noisy:
            return cls(float(vec[0]), float(vec[1]), vec[2:-1].copy(), float(vec[-1]))
        return cls(float(vec[0]), float(vec[1]), vec[2:].copy())

    def to_params(self, noise_variance: float = DEFAULT_NOISE_VARIANCE) -> GpHyperparameters:
        tau = np.exp(self.log_global_shrinkage)
        noise = (
            float(np.exp(self.log_noise_variance))
            if self.log_noise_variance is not None
            else noise_variance
        )
        return GpHyperparameters(
            kernel_variance=float(np.exp(self.log_kernel_variance)),
            global_shrinkage=float(tau),
            inv_sq_lengthscales=np.exp(self.log_global_shrinkage + self.log_rho_tilde),
            noise_variance=noise,
        )

    @classmethod
    def from_params(cls, params: GpHyperparameters, noisy: bool = False) -> "UnconstrainedState":
        log_tau = float(np.log(params.global_shrinkage))
        return cls(
            float(np.log(params.kernel_variance)),
            log_tau,
            np.log(params.inv_sq_lengthscales) - log_tau,
            float(np.log(params.noise_variance)) if noisy else None,
        )


def initial_state(dim: int, config: ShrinkagePriorConfig) -> UnconstrainedState:
    """Chain initialization at the prior medians (tau = alpha, rho_tilde = 1, s_k^2 = 1)."""
    return UnconstrainedState(
        0.0,
        float(np.log(config.alpha)),
        np.zeros(dim),
        0.0 if config.noisy else None,
    )


def half_cauchy_log_density(value, scale: float):
    """log p(v) for v ~ half-Cauchy(scale); -inf for v <= 0. Vectorized."""
    if scale <= 0.0:
        raise ValueError(f"scale must be positive, got {scale}")
    v = np.asarray(value, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            v > 0.0,
            _LOG_2_OVER_PI - np.log(scale) - np.log1p((v / scale) ** 2),
            -np.inf,
        )
    return float(out) if np.isscalar(value) else out


def _half_cauchy_term_and_grad(log_v: np.ndarray, scale: float):
    """log HC(e^u | scale) + u (Jacobian included) and its d/du, elementwise."""
    v = np.exp(log_v)
    value = _LOG_2_OVER_PI - np.log(scale) - np.log1p((v / scale) ** 2) + log_v
    grad = 1.0 - 2.0 * v * v / (scale * scale + v * v)
    return value, grad


def _log_normal_term_and_grad(log_v: float, log_scale: float):
    """log LN(e^u | 0, log_scale^2) + u collapses to a Normal density on u."""
    value = -0.5 * np.log(2.0 * np.pi) - np.log(log_scale) - 0.5 * (log_v / log_scale) ** 2
    grad = -log_v / (log_scale * log_scale)
    return value, grad


def _shrinkage_value_and_grad(
    vec: np.ndarray,
    x: np.ndarray,
    y_std: np.ndarray,
    config: ShrinkagePriorConfig,
    kernel: str,
    fixed_log_tau: float | None = None,
):
    """Log joint (or per-tau objective) and gradient over the raw vector.

    The single implementation behind both the public operation and the
    sampler/optimizer targets; stays container-free because samplers evaluate
    it once per leapfrog step.
    """
    d = x.shape[1]
    log_sk2 = float(vec[0])
    if fixed_log_tau is None:
        log_tau = float(vec[1])
        log_rho_tilde = vec[2 : 2 + d]
    else:
        log_tau = fixed_log_tau
        log_rho_tilde = vec[1 : 1 + d]
    kernel_variance = float(np.exp(log_sk2))
    rho = np.exp(log_tau + log_rho_tilde)
    noise = float(np.exp(vec[-1])) if config.noisy else gp.DEFAULT_NOISE_VARIANCE
    if not np.isfinite(kernel_variance) or not np.isfinite(noise) or not np.isfinite(
        float(rho.sum())
    ):
        raise ModelNumericsError("hyperparameters overflow the unconstrained transform")

    mll, g_log_sk2, g_rho, g_log_s2, _, _, _ = gp.mll_core(
        x, y_std, kernel_variance, rho, noise, kernel
    )

    rho_terms, rho_grads = _half_cauchy_term_and_grad(log_rho_tilde, 1.0)
    sk_term, sk_grad = _log_normal_term_and_grad(log_sk2, config.kernel_variance_log_scale)
    value = mll + float(rho_terms.sum()) + float(sk_term)
    grad = np.empty(np.asarray(vec).size)
    grad[0] = g_log_sk2 + sk_grad
    pos = 1
    if fixed_log_tau is None:
        tau_term, tau_grad = _half_cauchy_term_and_grad(np.asarray(log_tau), config.alpha)
        value += float(tau_term)
        grad[1] = float(rho @ g_rho) + float(tau_grad)
        pos = 2
    grad[pos : pos + d] = rho * g_rho + rho_grads
    if config.noisy:
        s2_term, s2_grad = _log_normal_term_and_grad(float(vec[-1]), config.noise_log_scale)
        value += float(s2_term)
        grad[-1] = g_log_s2 + s2_grad
    if not np.isfinite(value) or not np.isfinite(float(grad.sum())):
        raise ModelNumericsError("non-finite log joint")
    return value, grad


def log_joint(
    state: UnconstrainedState,
    history: EvaluationHistory,
    config: ShrinkagePriorConfig,
    kernel: str = "rbf",
) -> float:
    """Unnormalized log posterior density in unconstrained coordinates.

    Marginal likelihood plus prior terms for tau, the rho_tilde vector, the
    kernel variance (and noise in noisy mode), each including its exp-transform
    log-Jacobian.
    """
    value, _ = log_joint_and_gradient(state, history, config, kernel)
    return value


def log_joint_and_gradient(
    state: UnconstrainedState,
    history: EvaluationHistory,
    config: ShrinkagePriorConfig,
    kernel: str = "rbf",
) -> tuple[float, np.ndarray]:
    """Log joint and its gradient with respect to the unconstrained vector."""
    if config.noisy != (state.log_noise_variance is not None):
        raise ValueError("state noise coordinate does not match config.noisy")
    return _shrinkage_value_and_grad(
        state.to_vector(), history.x, history.y_std, config, kernel
    )


def _guarded(fn):
    """Wrap a raising target so samplers/optimizers see -inf instead.

    Extreme unconstrained coordinates overflow to invalid hyperparameters
    (ValueError) or non-finite algebra (ModelNumericsError); both mean the
    point has no posterior mass.
    """

    def target(vec: np.ndarray) -> tuple[float, np.ndarray]:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                return fn(vec)
        except (ModelNumericsError, ValueError, FloatingPointError, np.linalg.LinAlgError):
            return -np.inf, np.zeros_like(np.asarray(vec, dtype=float))

    return target


def make_shrinkage_target(
    history: EvaluationHistory,
    config: ShrinkagePriorConfig,
    kernel: str = "rbf",
    fixed_log_tau: float | None = None,
):
    """Log-density callable (value, grad) over the unconstrained vector.

    With ``fixed_log_tau`` set, tau is held fixed, its prior term is dropped,
    and the vector layout shrinks to (log s_k^2, log rho_tilde_1..D[, log s^2])
    -- the per-tau objective used by the MAP path.
    """
    x, y_std = history.x, history.y_std

    def target(vec):
        return _shrinkage_value_and_grad(vec, x, y_std, config, kernel, fixed_log_tau)

    return _guarded(target)


def make_weak_prior_target(
    history: EvaluationHistory, kernel: str = "rbf", log_scale: float = 10.0
):
    """Non-sparse reference model: weak log-Normal priors on every rho_i.

    Vector layout (log s_k^2, log rho_1..D); log-Normal(0, log_scale^2) priors
    on the squared length scales are equivalent to the same prior on the rho_i
    and turn into Normal densities on the log coordinates.
    """
    x, y_std = history.x, history.y_std

    def target(vec):
        u = np.asarray(vec, dtype=float)
        kernel_variance = float(np.exp(u[0]))
        rho = np.exp(u[1:])
        if not np.isfinite(kernel_variance) or not np.isfinite(float(rho.sum())):
            raise ModelNumericsError("hyperparameters overflow the unconstrained transform")
        mll, g_log_sk2, g_rho, _, _, _, _ = gp.mll_core(
            x, y_std, kernel_variance, rho, DEFAULT_NOISE_VARIANCE, kernel
        )
        prior = -0.5 * float((u / log_scale) @ (u / log_scale)) - u.size * (
            0.5 * np.log(2.0 * np.pi) + np.log(log_scale)
        )
        grad = np.empty_like(u)
        grad[0] = g_log_sk2
        grad[1:] = rho * g_rho
        grad -= u / (log_scale * log_scale)
        value = mll + prior
        if not np.isfinite(value) or not np.isfinite(float(grad.sum())):
            raise ModelNumericsError("non-finite weak-prior objective")
        return value, grad

    return _guarded(target)


def make_mle_target(history: EvaluationHistory, kernel: str = "rbf", learn_noise: bool = False):
    """Bare marginal likelihood over (log s_k^2, log rho_1..D); no prior.

    With ``learn_noise`` the vector gains a trailing coordinate u with
    sigma^2 = 1e-6 + exp(u): the observation noise becomes a maximum-likelihood
    degree of freedom floored at the noise-free default.
    """
    x, y_std = history.x, history.y_std
    d = history.dim

    def target(vec):
        noise = DEFAULT_NOISE_VARIANCE + float(np.exp(vec[-1])) if learn_noise else (
            DEFAULT_NOISE_VARIANCE
        )
        kernel_variance = float(np.exp(vec[0]))
        rho = np.exp(np.asarray(vec[1 : 1 + d], dtype=float))
        if not np.isfinite(kernel_variance) or not np.isfinite(noise) or not np.isfinite(
            float(rho.sum())
        ):
            raise ModelNumericsError("hyperparameters overflow the unconstrained transform")
        mll, g_log_sk2, g_rho, g_log_s2, _, _, _ = gp.mll_core(
            x, y_std, kernel_variance, rho, noise, kernel
        )
        grad = np.empty_like(np.asarray(vec, dtype=float))
        grad[0] = g_log_sk2
        grad[1 : 1 + d] = rho * g_rho
        if learn_noise:
            # g_log_s2 is d/d log(sigma^2); chain through the floored form
            grad[-1] = g_log_s2 * float(np.exp(vec[-1])) / noise
        if not np.isfinite(mll) or not np.isfinite(float(grad.sum())):
            raise ModelNumericsError("non-finite marginal likelihood")
        return mll, grad

    return _guarded(target)


def mle_vector_to_params(vec: np.ndarray, learn_noise: bool = False) -> GpHyperparameters:
    """Decode the maximum-likelihood vector layout back to hyperparameters."""
    vec = np.asarray(vec, dtype=float)
    d = vec.size - 1 - (1 if learn_noise else 0)
    noise = DEFAULT_NOISE_VARIANCE + float(np.exp(vec[-1])) if learn_noise else (
        DEFAULT_NOISE_VARIANCE
    )
    return GpHyperparameters(
        kernel_variance=float(np.exp(vec[0])),
        global_shrinkage=1.0,
        inv_sq_lengthscales=np.exp(vec[1 : 1 + d]),
        noise_variance=noise,
    )


def lengthscale_vector_to_params(vec: np.ndarray) -> GpHyperparameters:
    """Decode the (log s_k^2, log rho_1..D) layout used by the weak/MLE targets."""
    return GpHyperparameters(
        kernel_variance=float(np.exp(vec[0])),
        global_shrinkage=1.0,
        inv_sq_lengthscales=np.exp(np.asarray(vec[1:], dtype=float)),
    )


def fit_gp_nuts(
    history: EvaluationHistory,
    prior_config: ShrinkagePriorConfig,
    nuts_config: "nuts.NutsConfig",
    kernel: str = "rbf",
) -> PosteriorSampleSet:
    """Sample the shrinkage-prior posterior with NUTS and cache factorizations."""
    target = make_shrinkage_target(history, prior_config, kernel)
    init = initial_state(history.dim, prior_config).to_vector()
    chain = nuts.nuts_sample(target, init, nuts_config)
    draws = [
        UnconstrainedState.from_vector(vec, noisy=prior_config.noisy).to_params()
        for vec in chain.draws
    ]
    return gp.build_sample_set(history, draws, kernel, chain.diagnostics)


def _rho_matrix(samples: PosteriorSampleSet) -> np.ndarray:
    return np.stack([d.inv_sq_lengthscales for d in samples.draws])


def posterior_median_lengthscales(samples: PosteriorSampleSet) -> np.ndarray:
    """Coordinate-wise median of rho across draws (lower median for even counts)."""
    rho = _rho_matrix(samples)
    ordered = np.sort(rho, axis=0)
    return ordered[(rho.shape[0] - 1) // 2]


def effective_subspace_dimension(samples: PosteriorSampleSet, cutoff: float) -> int:
    """Number of coordinates whose posterior-median rho exceeds the cutoff."""
    if cutoff <= 0.0:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    return int(np.sum(posterior_median_lengthscales(samples) > cutoff))


def found_relevant_dimensions(samples: PosteriorSampleSet, relevant, top_k: int) -> int:
    """How many of the given indices rank within the top_k largest medians.

    Ties are broken toward lower coordinate index.
    """
    relevant = sorted(set(int(i) for i in relevant))
    if top_k < len(relevant):
        raise ValueError(f"top_k={top_k} is smaller than the relevant set ({len(relevant)})")
    medians = posterior_median_lengthscales(samples)
    order = np.argsort(-medians, kind="stable")
    top = set(order[:top_k].tolist())
    return sum(1 for i in relevant if i in top)
