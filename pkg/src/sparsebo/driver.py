"""Optimization-loop orchestration: quasi-random initialization, the
fit / maximize-EI / evaluate loop with incumbent tracking and per-iteration
relevance diagnostics, replication sweeps, the quasi-random baseline, and the
three-way model-fit comparison diagnostic.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from . import gp, mapfit, model
from .acquisition import AcquisitionConfig, propose_next
from .benchmarks import BenchmarkProblem
from .gp import EvaluationHistory, ModelNumericsError, PosteriorSampleSet, predict_std
from .mapfit import MapConfig
from .model import ShrinkagePriorConfig
from .nuts import NutsConfig, nuts_sample
from .sobol import sobol_points

_TAG_INIT = 11
_TAG_ACQUIRE = 13
_TAG_FALLBACK = 17
_TAG_FIT = 19
_TAG_WEAK = 23
_TAG_SPARSE = 29


def child_seed(seed: int, *tags: int) -> int:
    """Deterministic derived seed for an independent random stream."""
    return int(np.random.SeedSequence([int(seed), *tags]).generate_state(1)[0])


@dataclass(frozen=True)
class BoConfig:
    """Full configuration of one optimization run."""

    initial_budget: int
    total_budget: int
    alpha: float = 0.1
    inference: str = "nuts"
    nuts_config: NutsConfig = field(default_factory=NutsConfig)
    map_config: MapConfig = field(default_factory=MapConfig)
    kernel: str = "rbf"
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    seed: int = 0
    initial_design: tuple[np.ndarray, np.ndarray] | None = None
    noisy: bool = False

    def __post_init__(self):
        if self.initial_budget < 2:
            raise ValueError("initial budget must be at least 2")
        if self.total_budget < self.initial_budget:
            raise ValueError("total budget must be at least the initial budget")
        if self.inference not in ("nuts", "map"):
            raise ValueError(f"inference must be 'nuts' or 'map', got {self.inference!r}")
        if self.kernel not in ("rbf", "matern52"):
            raise ValueError(f"kernel must be 'rbf' or 'matern52', got {self.kernel!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def prior(self) -> ShrinkagePriorConfig:
        return ShrinkagePriorConfig(alpha=self.alpha, noisy=self.noisy)


@dataclass(frozen=True)
class IterationRecord:
    """One optimization step: the query, its value, and the fit diagnostics."""

    t: int
    x: np.ndarray
    y: float
    y_min: float
    rho_median: np.ndarray | None = None
    eff_dim_01: int | None = None
    eff_dim_05: int | None = None
    jitter: float | None = None
    sampler: dict | None = None
    fit_failed: bool = False
    duplicate: bool = False
    wall_time_s: float = 0.0


@dataclass(frozen=True)
class RunRecord:
    """Complete trace of one run plus the returned minimizer."""

    iterations: tuple[IterationRecord, ...]
    x_min: np.ndarray
    y_min: float
    t_min: int
    problem_name: str
    seed: int

    @property
    def num_evaluations(self) -> int:
        return len(self.iterations)

    def incumbents(self) -> np.ndarray:
        return np.array([rec.y_min for rec in self.iterations])


@dataclass(frozen=True)
class ReplicationFailure:
    """Placeholder for a replication that raised; other replications proceed."""

    seed: int
    error: str


def _scalar_diagnostics(diagnostics: dict) -> dict:
    return {
        k: (float(v) if isinstance(v, float) else v)
        for k, v in diagnostics.items()
        if isinstance(v, (bool, int, float))
    }


def _fit(history: EvaluationHistory, config: BoConfig, t: int) -> PosteriorSampleSet:
    fit_seed = child_seed(config.seed, _TAG_FIT, t)
    if config.inference == "nuts":
        return model.fit_gp_nuts(
            history, config.prior(), replace(config.nuts_config, seed=fit_seed), config.kernel
        )
    return mapfit.map_fit(
        history, replace(config.map_config, seed=fit_seed), config.prior(), config.kernel
    )


def _fallback_point(existing: np.ndarray, dim: int, seed: int) -> np.ndarray:
    # Under the prior the predictive law is the same everywhere (stationary
    # kernel), so prior-predictive EI cannot rank candidates; the first
    # unevaluated quasi-random point is the deterministic choice.
    candidates = sobol_points(max(64, existing.shape[0] + 1), dim, seed=seed)
    for cand in candidates:
        if not np.any(np.all(existing == cand, axis=1)):
            return cand
    return candidates[-1]


def run(problem: BenchmarkProblem, config: BoConfig) -> RunRecord:
    """Execute one full optimization run; exactly ``total_budget`` evaluations.

    If inference fails at an iteration, the failure is recorded and the query
    falls back to the next unused quasi-random point so the run continues.
    Deterministic given (problem, config, seed).
    """
    dim = problem.dim
    m, total = config.initial_budget, config.total_budget

    records: list[IterationRecord] = []
    xs: list[np.ndarray] = []
    ys: list[float] = []

    if config.initial_design is not None:
        x_init, y_init = config.initial_design
        x_init = np.atleast_2d(np.asarray(x_init, dtype=float))
        y_init = np.asarray(y_init, dtype=float).ravel()
        if x_init.shape != (m, dim) or y_init.size != m:
            raise ValueError("provided initial design does not match the configured budget")
    else:
        x_init = sobol_points(m, dim, seed=child_seed(config.seed, _TAG_INIT))
        y_init = None

    for i in range(m):
        t0 = time.perf_counter()
        x = x_init[i]
        y = float(y_init[i]) if y_init is not None else problem.evaluate(x)
        xs.append(x)
        ys.append(y)
        records.append(
            IterationRecord(
                t=i + 1,
                x=x,
                y=y,
                y_min=min(ys),
                wall_time_s=time.perf_counter() - t0,
            )
        )

    for t in range(m + 1, total + 1):
        t0 = time.perf_counter()
        history = EvaluationHistory(np.array(xs), np.array(ys))
        rho_median = None
        eff01 = eff05 = None
        jitter = None
        sampler = None
        fit_failed = False
        try:
            samples = _fit(history, config, t)
            rho_median = model.posterior_median_lengthscales(samples)
            eff01 = model.effective_subspace_dimension(samples, 0.1)
            eff05 = model.effective_subspace_dimension(samples, 0.5)
            jitter = samples.max_jitter
            sampler = _scalar_diagnostics(samples.diagnostics)
            x_next = propose_next(
                history, samples, config.acquisition, seed=child_seed(config.seed, _TAG_ACQUIRE, t)
            )
        except (ModelNumericsError, np.linalg.LinAlgError) as exc:
            fit_failed = True
            sampler = {"error": str(exc)}
            x_next = _fallback_point(
                history.x, dim, seed=child_seed(config.seed, _TAG_FALLBACK, t)
            )
        x_next = np.clip(np.asarray(x_next, dtype=float), 0.0, 1.0)
        duplicate = bool(np.any(np.all(history.x == x_next, axis=1)))
        y_next = problem.evaluate(x_next)
        xs.append(x_next)
        ys.append(y_next)
        records.append(
            IterationRecord(
                t=t,
                x=x_next,
                y=y_next,
                y_min=min(ys),
                rho_median=rho_median,
                eff_dim_01=eff01,
                eff_dim_05=eff05,
                jitter=jitter,
                sampler=sampler,
                fit_failed=fit_failed,
                duplicate=duplicate,
                wall_time_s=time.perf_counter() - t0,
            )
        )

    t_min = int(np.argmin(ys))
    return RunRecord(
        iterations=tuple(records),
        x_min=xs[t_min],
        y_min=float(ys[t_min]),
        t_min=t_min + 1,
        problem_name=problem.name,
        seed=config.seed,
    )


def _run_one(task) -> "RunRecord | ReplicationFailure":
    problem, config, seed = task
    try:
        return run(problem, replace(config, seed=seed))
    except Exception as exc:  # noqa: BLE001 - a sweep must survive one bad replication
        return ReplicationFailure(seed=seed, error=f"{type(exc).__name__}: {exc}")


def replicate(
    problem: BenchmarkProblem,
    config: BoConfig,
    reps: int,
    base_seed: int,
    jobs: int = 1,
) -> list["RunRecord | ReplicationFailure"]:
    """Independent replications with seeds base_seed + r, sharing the problem.

    Results come back in seed order regardless of scheduling; replication r
    failing yields a :class:`ReplicationFailure` entry without affecting the
    others.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    tasks = [(problem, config, base_seed + r) for r in range(reps)]
    if jobs > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, reps)) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(task) for task in tasks]


def sobol_baseline(problem: BenchmarkProblem, total_budget: int, seed: int) -> RunRecord:
    """Scrambled quasi-random search: the model-free reference strategy."""
    if total_budget < 1:
        raise ValueError("total budget must be >= 1")
    points = sobol_points(total_budget, problem.dim, seed=child_seed(seed, _TAG_INIT))
    records = []
    best = np.inf
    best_idx = 0
    ys = []
    for i, x in enumerate(points):
        t0 = time.perf_counter()
        y = problem.evaluate(x)
        ys.append(y)
        if y < best:
            best, best_idx = y, i
        records.append(
            IterationRecord(t=i + 1, x=x, y=y, y_min=best, wall_time_s=time.perf_counter() - t0)
        )
    return RunRecord(
        iterations=tuple(records),
        x_min=points[best_idx],
        y_min=float(best),
        t_min=best_idx + 1,
        problem_name=problem.name,
        seed=seed,
    )


def _mixture_metrics(
    samples: PosteriorSampleSet, x_test: np.ndarray, y_test_std: np.ndarray
) -> dict:
    means = []
    variances = []
    for fact in samples.factorizations:
        mu, var = predict_std(x_test, fact)
        means.append(mu)
        variances.append(var + fact.params.noise_variance)
    means = np.stack(means)
    variances = np.stack(variances)
    mixture_mean = means.mean(axis=0)
    mixture_var = (variances + means**2).mean(axis=0) - mixture_mean**2
    np.maximum(mixture_var, 0.0, out=mixture_var)
    half_width = 1.96 * np.sqrt(mixture_var)

    log_terms = (
        -0.5 * np.log(2.0 * np.pi * variances) - 0.5 * (y_test_std - means) ** 2 / variances
    )
    log_lik = float(np.sum(logsumexp(log_terms, axis=0) - np.log(means.shape[0])))
    rmse = float(np.sqrt(np.mean((mixture_mean - y_test_std) ** 2)))
    return {
        "mean_std": mixture_mean,
        "lower95_std": mixture_mean - half_width,
        "upper95_std": mixture_mean + half_width,
        "test_log_likelihood": log_lik,
        "rmse_std": rmse,
        "mean_reversion_fraction": float(np.mean(np.abs(mixture_mean) <= 0.1)),
    }


def fit_diagnose(
    train: EvaluationHistory,
    test: EvaluationHistory,
    kernel: str = "rbf",
    alpha: float = 0.1,
    nuts_config: NutsConfig | None = None,
    seed: int = 0,
) -> dict:
    """Compare three surrogate fits on held-out data.

    Fits (a) a maximum-likelihood GP with no prior ("mle"), (b) a GP with weak
    log-Normal priors on the squared length scales sampled with NUTS ("weak"),
    and (c) the sparsity-inducing shrinkage-prior GP sampled with NUTS
    ("sparse"), then reports test predictions with 95% intervals, test log
    likelihood, and RMSE in standardized (train-scaler) units.  A model that
    fails to fit is reported with an ``error`` entry instead of metrics.
    """
    nuts_config = nuts_config or NutsConfig()
    y_test_std = (test.y_raw - train.y_mean) / train.y_scale
    report: dict[str, dict] = {}

    def attempt(name, fit):
        try:
            report[name] = _mixture_metrics(fit(), test.x, y_test_std)
        except (ModelNumericsError, np.linalg.LinAlgError, ValueError) as exc:
            report[name] = {"error": f"{type(exc).__name__}: {exc}"}

    def fit_mle():
        # classic GP maximum likelihood: quasi-Newton ascent from unit length
        # scales, with the observation noise as an extra (floored) parameter
        target = model.make_mle_target(train, kernel, learn_noise=True)

        def negative(vec):
            value, grad = target(vec)
            return -value, -grad

        result = minimize(negative, np.zeros(2 + train.dim), jac=True, method="L-BFGS-B")
        if not np.isfinite(result.fun):
            raise ModelNumericsError("maximum-likelihood fit diverged")
        params = model.mle_vector_to_params(result.x, learn_noise=True)
        return gp.build_sample_set(train, [params], kernel, {"mll": -float(result.fun)})

    def fit_weak():
        target = model.make_weak_prior_target(train, kernel)
        chain = nuts_sample(
            target,
            np.zeros(1 + train.dim),
            replace(nuts_config, seed=child_seed(seed, _TAG_WEAK)),
        )
        draws = [model.lengthscale_vector_to_params(vec) for vec in chain.draws]
        return gp.build_sample_set(train, draws, kernel, chain.diagnostics)

    def fit_sparse():
        return model.fit_gp_nuts(
            train,
            ShrinkagePriorConfig(alpha=alpha),
            replace(nuts_config, seed=child_seed(seed, _TAG_SPARSE)),
            kernel,
        )

    attempt("mle", fit_mle)
    attempt("weak", fit_weak)
    attempt("sparse", fit_sparse)
    return report
