"""Expected improvement for minimization: closed form, posterior-sample average,
analytic input gradient, and candidate-then-refine maximization.

All EI computations run in standardized target units; standardization is
monotone, so the argmax matches raw-unit EI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.optimize import minimize
from scipy.special import ndtr

from . import kernels
from .gp import EvaluationHistory, GpFactorization, GpHyperparameters, PosteriorSampleSet, predict_std
from .sobol import sobol_points

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class AcquisitionConfig:
    """Candidate-scan and refinement budgets for EI maximization."""

    candidate_count: int = 5000
    restart_count: int = 3
    max_refine_evals: int = 100
    quasi_newton_memory: int = 10
    convergence_tol: float = 1e-8
    sigma_floor: float = 1e-10

    def __post_init__(self):
        if not self.candidate_count >= self.restart_count >= 1:
            raise ValueError("need candidate_count >= restart_count >= 1")
        if self.max_refine_evals < 1:
            raise ValueError("max_refine_evals must be >= 1")


def _norm_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _ei_from_moments(mean, variance, y_min_std: float, sigma_floor: float):
    sigma = np.sqrt(variance)
    gap = y_min_std - mean
    z = gap / np.maximum(sigma, sigma_floor)
    return np.maximum(gap * ndtr(z) + sigma * _norm_pdf(z), 0.0)


def ei_single(
    x: np.ndarray,
    y_min_std: float,
    params: GpHyperparameters,
    factorization: GpFactorization,
    sigma_floor: float = 1e-10,
) -> float:
    """Closed-form EI under a single hyperparameter draw (standardized units)."""
    del params  # the factorization already carries the draw it was built from
    mean, variance = predict_std(np.asarray(x, dtype=float).reshape(1, -1), factorization)
    return float(_ei_from_moments(mean, variance, y_min_std, sigma_floor)[0])


def ei_averaged_batch(
    x: np.ndarray,
    y_min_std: float,
    samples: PosteriorSampleSet,
    sigma_floor: float = 1e-10,
) -> np.ndarray:
    """EI averaged over posterior draws, for a batch of query points."""
    xq = np.atleast_2d(np.asarray(x, dtype=float))
    total = np.zeros(xq.shape[0])
    for fact in samples.factorizations:
        mean, variance = predict_std(xq, fact)
        total += _ei_from_moments(mean, variance, y_min_std, sigma_floor)
    return total / samples.num_draws


def ei_averaged(
    x: np.ndarray,
    y_min_std: float,
    samples: PosteriorSampleSet,
    sigma_floor: float = 1e-10,
) -> float:
    """Arithmetic mean of per-draw EI at one point."""
    return float(ei_averaged_batch(x, y_min_std, samples, sigma_floor)[0])


def _ei_and_gradient_one_draw(
    x: np.ndarray, y_min_std: float, fact: GpFactorization, sigma_floor: float
) -> tuple[float, np.ndarray]:
    p = fact.params
    diff = x[None, :] - fact.x_train
    r2 = kernels.weighted_sq_dists(x[None, :], fact.x_train, p.inv_sq_lengthscales)
    k_star, dk = kernels.kernel_and_r2_gradient(r2, p.kernel_variance, fact.kernel)
    k_star = k_star[0]
    jac = 2.0 * dk[0][:, None] * (p.inv_sq_lengthscales[None, :] * diff)

    mean = float(k_star @ fact.alpha)
    w = cho_solve((fact.chol_lower, True), k_star)
    variance = max(float(p.kernel_variance - k_star @ w), 0.0)
    sigma = np.sqrt(variance)

    grad_mean = jac.T @ fact.alpha
    gap = y_min_std - mean
    if sigma > sigma_floor:
        z = gap / sigma
        grad_sigma = (-2.0 * (jac.T @ w)) / (2.0 * sigma)
        grad = -ndtr(z) * grad_mean + _norm_pdf(z) * grad_sigma
    else:
        # sigma is pinned at the floor: only the mean channel moves EI
        z = gap / sigma_floor
        grad = (-ndtr(z) - _norm_pdf(z) * (gap - sigma * z) / sigma_floor) * grad_mean
    ei = max(gap * ndtr(z) + sigma * _norm_pdf(z), 0.0)
    return ei, grad


def ei_gradient(
    x: np.ndarray,
    y_min_std: float,
    samples: PosteriorSampleSet,
    sigma_floor: float = 1e-10,
) -> np.ndarray:
    """Exact gradient of the averaged EI with respect to the query point."""
    x = np.asarray(x, dtype=float).ravel()
    grad = np.zeros_like(x)
    for fact in samples.factorizations:
        grad += _ei_and_gradient_one_draw(x, y_min_std, fact, sigma_floor)[1]
    return grad / samples.num_draws


def propose_next(
    history: EvaluationHistory,
    samples: PosteriorSampleSet,
    config: AcquisitionConfig,
    seed: int,
) -> np.ndarray:
    """Maximize averaged EI: scrambled-Sobol scan, then bounded quasi-Newton.

    Scores ``candidate_count`` scrambled Sobol points, refines the top
    ``restart_count`` of them (ties to the lower Sobol index) with L-BFGS-B
    inside the unit cube, and returns the best point seen, which by
    construction has EI at least as large as every raw candidate.  If every
    refinement fails numerically the best raw candidate is returned.
    Deterministic given (history, samples, seed).
    """
    dim = history.dim
    y_min_std = history.y_min_std
    candidates = sobol_points(config.candidate_count, dim, seed=seed)
    values = ei_averaged_batch(candidates, y_min_std, samples, config.sigma_floor)
    order = np.argsort(-values, kind="stable")
    starts = candidates[order[: config.restart_count]]

    def negative_ei(x):
        value = 0.0
        grad = np.zeros(dim)
        for fact in samples.factorizations:
            v, g = _ei_and_gradient_one_draw(x, y_min_std, fact, config.sigma_floor)
            value += v
            grad += g
        n = samples.num_draws
        return -value / n, -grad / n

    finalists = [candidates[order[0]]]
    for x0 in starts:
        try:
            result = minimize(
                negative_ei,
                x0,
                jac=True,
                method="L-BFGS-B",
                bounds=[(0.0, 1.0)] * dim,
                options={
                    "maxfun": config.max_refine_evals,
                    "maxcor": config.quasi_newton_memory,
                    "gtol": config.convergence_tol,
                },
            )
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            continue
        if np.all(np.isfinite(result.x)):
            finalists.append(np.clip(result.x, 0.0, 1.0))

    final_scores = ei_averaged_batch(np.stack(finalists), y_min_std, samples, config.sigma_floor)
    return finalists[int(np.argmax(final_scores))]
