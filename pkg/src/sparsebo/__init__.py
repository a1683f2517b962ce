"""High-dimensional Bayesian optimization with a hierarchical shrinkage GP prior.

A Gaussian-process surrogate whose per-dimension inverse squared length scales
carry half-Cauchy shrinkage priors coupled by a global scale, inferred with a
built-in No-U-Turn sampler (or a per-scale MAP grid), driving expected
improvement over the unit hypercube.
"""

__version__ = "0.1.0"

from .acquisition import (
    AcquisitionConfig,
    ei_averaged,
    ei_averaged_batch,
    ei_gradient,
    ei_single,
    propose_next,
)
from .benchmarks import (
    BenchmarkProblem,
    branin,
    embed,
    hartmann6,
    load_problem_spec,
    make_problem,
    rosenbrock3_log1p,
    rotated_hartmann,
    save_problem_spec,
)
from .driver import (
    BoConfig,
    IterationRecord,
    ReplicationFailure,
    RunRecord,
    fit_diagnose,
    replicate,
    run,
    sobol_baseline,
)
from .gp import (
    EvaluationHistory,
    GpFactorization,
    GpHyperparameters,
    GpPrediction,
    ModelNumericsError,
    PosteriorSampleSet,
    factorize,
    marginal_log_likelihood,
    matern52_kernel,
    predict,
    rbf_kernel,
)
from .mapfit import MapConfig, loo_log_likelihood, map_fit
from .model import (
    ShrinkagePriorConfig,
    UnconstrainedState,
    effective_subspace_dimension,
    fit_gp_nuts,
    found_relevant_dimensions,
    half_cauchy_log_density,
    log_joint,
    log_joint_and_gradient,
    posterior_median_lengthscales,
)
from .nuts import ChainResult, NutsConfig, leapfrog, nuts_sample
from .sobol import SobolStream, sobol_points

__all__ = [
    "AcquisitionConfig",
    "BenchmarkProblem",
    "BoConfig",
    "ChainResult",
    "EvaluationHistory",
    "GpFactorization",
    "GpHyperparameters",
    "GpPrediction",
    "IterationRecord",
    "MapConfig",
    "ModelNumericsError",
    "NutsConfig",
    "PosteriorSampleSet",
    "ReplicationFailure",
    "RunRecord",
    "ShrinkagePriorConfig",
    "SobolStream",
    "UnconstrainedState",
    "branin",
    "effective_subspace_dimension",
    "ei_averaged",
    "ei_averaged_batch",
    "ei_gradient",
    "ei_single",
    "embed",
    "factorize",
    "fit_diagnose",
    "fit_gp_nuts",
    "found_relevant_dimensions",
    "half_cauchy_log_density",
    "hartmann6",
    "leapfrog",
    "load_problem_spec",
    "log_joint",
    "log_joint_and_gradient",
    "loo_log_likelihood",
    "make_problem",
    "map_fit",
    "marginal_log_likelihood",
    "matern52_kernel",
    "nuts_sample",
    "posterior_median_lengthscales",
    "predict",
    "propose_next",
    "rbf_kernel",
    "replicate",
    "rosenbrock3_log1p",
    "rotated_hartmann",
    "run",
    "save_problem_spec",
    "sobol_baseline",
    "sobol_points",
]
