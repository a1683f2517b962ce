import numpy as np
import pytest
from scipy import stats

from sparsebo import ChainResult, NutsConfig, leapfrog, nuts_sample


def gaussian_target(variances):
    """Independent zero-mean Gaussian log density with the given variances."""
    var = np.asarray(variances, dtype=float)

    def value_and_grad(x):
        return float(-0.5 * np.sum(x * x / var)), -x / var

    return value_and_grad


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_defaults_and_retained_count():
    config = NutsConfig()
    assert (config.warmup_steps, config.post_warmup_steps, config.thinning) == (512, 256, 16)
    assert config.num_retained == 16
    assert config.max_tree_depth == 6


def test_reduced_budget():
    config = NutsConfig.reduced(seed=3)
    assert (config.warmup_steps, config.post_warmup_steps) == (128, 128)
    assert config.num_retained == 8
    assert config.seed == 3


def test_config_validation():
    with pytest.raises(ValueError, match="divisible"):
        NutsConfig(post_warmup_steps=100, thinning=16)
    with pytest.raises(ValueError):
        NutsConfig(max_tree_depth=0)
    with pytest.raises(ValueError):
        NutsConfig(target_accept_prob=1.0)


# ---------------------------------------------------------------------------
# leapfrog integrator
# ---------------------------------------------------------------------------


def test_leapfrog_fixed_point_with_zero_momentum_and_gradient():
    flat = lambda x: (0.0, np.zeros_like(x))
    q0 = np.array([0.3, -1.2])
    q1, r1, _, _, ok = leapfrog(q0, np.zeros(2), 0.1, np.ones(2), flat)
    assert ok
    np.testing.assert_array_equal(q1, q0)
    np.testing.assert_array_equal(r1, np.zeros(2))


def test_leapfrog_reversibility():
    target = gaussian_target([1.0, 4.0, 0.25])
    rng = np.random.default_rng(1)
    inv_mass = np.array([1.0, 0.5, 2.0])
    for _ in range(10):
        q0, r0 = rng.standard_normal(3), rng.standard_normal(3)
        q1, r1, _, _, _ = leapfrog(q0, r0, 0.3, inv_mass, target)
        q2, r2, _, _, _ = leapfrog(q1, -r1, 0.3, inv_mass, target)
        np.testing.assert_allclose(q2, q0, atol=1e-12)
        np.testing.assert_allclose(-r2, r0, atol=1e-12)


def _energy_drift(step_size, n_steps, q0, r0):
    target = gaussian_target([1.0])
    inv_mass = np.ones(1)

    def hamiltonian(q, r):
        return -target(q)[0] + 0.5 * float(r @ r)

    h0 = hamiltonian(q0, r0)
    q, r = q0, r0
    worst = 0.0
    for _ in range(n_steps):
        q, r, _, _, _ = leapfrog(q, r, step_size, inv_mass, target)
        worst = max(worst, abs(hamiltonian(q, r) - h0))
    return worst


def test_leapfrog_energy_drift_small_step():
    drift = _energy_drift(1e-3, 100, np.array([1.0]), np.array([0.5]))
    assert drift <= 1e-4


def test_leapfrog_energy_error_scales_quadratically():
    # fixed integration time (one oscillator period) so the max drift is the
    # amplitude of the shadow-Hamiltonian oscillation, which scales as eps^2
    period = 2 * np.pi
    eps_values = (1e-1, 1e-2, 1e-3)
    errors = [
        _energy_drift(eps, int(round(period / eps)), np.array([1.0]), np.array([0.5]))
        for eps in eps_values
    ]
    slopes = np.diff(np.log(errors)) / np.diff(np.log(eps_values))
    assert np.all((1.8 <= slopes) & (slopes <= 2.2))


def test_leapfrog_flags_nonfinite_gradient():
    def broken(x):
        return -np.inf, np.full_like(x, np.nan)

    _, _, _, _, ok = leapfrog(np.zeros(2), np.ones(2), 0.1, np.ones(2), broken)
    assert not ok


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_gaussian_moments_recovered():
    config = NutsConfig(warmup_steps=500, post_warmup_steps=2000, thinning=1, seed=7)
    result = nuts_sample(gaussian_target([1.0, 1.0]), np.zeros(2), config)
    assert result.draws.shape == (2000, 2)
    np.testing.assert_allclose(result.draws.mean(axis=0), [0.0, 0.0], atol=0.1)
    np.testing.assert_allclose(result.draws.var(axis=0), [1.0, 1.0], atol=0.15)


def test_determinism_bitwise():
    config = NutsConfig(warmup_steps=100, post_warmup_steps=64, thinning=4, seed=42)
    target = gaussian_target([1.0, 2.0, 3.0])
    a = nuts_sample(target, np.zeros(3), config)
    b = nuts_sample(target, np.zeros(3), config)
    assert np.array_equal(a.draws, b.draws)
    assert a.diagnostics["step_size"] == b.diagnostics["step_size"]


def test_kolmogorov_smirnov_against_analytic_cdf():
    config = NutsConfig(warmup_steps=500, post_warmup_steps=5000, thinning=1, seed=1)
    result = nuts_sample(gaussian_target([1.0]), np.zeros(1), config)
    statistic, pvalue = stats.kstest(result.draws[:, 0], "norm")
    assert pvalue > 0.01


def test_mass_adaptation_tracks_scale_separation():
    config = NutsConfig(warmup_steps=500, post_warmup_steps=64, thinning=4, seed=5)
    result = nuts_sample(gaussian_target([1.0, 100.0]), np.zeros(2), config)
    inv_mass = result.diagnostics["inv_mass_diag"]
    ratio = inv_mass.max() / inv_mass.min()
    assert 50.0 <= ratio <= 200.0


def test_retained_count_and_tree_bound():
    config = NutsConfig(warmup_steps=64, post_warmup_steps=96, thinning=8, max_tree_depth=4, seed=2)
    result = nuts_sample(gaussian_target([1.0, 1.0, 1.0, 1.0]), np.zeros(4), config)
    assert result.draws.shape[0] == 96 // 8
    assert result.diagnostics["max_leapfrogs_per_transition"] <= 2**4


def test_nonfinite_init_rejected():
    target = gaussian_target([1.0])
    with pytest.raises(ValueError, match="initial point"):
        nuts_sample(target, np.array([np.inf]), target and NutsConfig(seed=0))


def test_divergence_warning_attached():
    # flat plateau with a catastrophic cliff: step size blows up on the
    # plateau, every trajectory falls off, all transitions diverge
    def cliff(x):
        inside = abs(float(x[0])) < 1.0
        return (0.0 if inside else -1e9), np.zeros(1)

    config = NutsConfig(warmup_steps=8, post_warmup_steps=16, thinning=1, seed=1)
    with pytest.warns(RuntimeWarning, match="diverged"):
        result = nuts_sample(cliff, np.zeros(1), config)
    assert result.diagnostics["divergence_warning"]
    assert result.diagnostics["divergences"] > 8


def test_chain_result_type():
    config = NutsConfig(warmup_steps=16, post_warmup_steps=16, thinning=4, seed=0)
    result = nuts_sample(gaussian_target([1.0]), np.zeros(1), config)
    assert isinstance(result, ChainResult)
    assert set(result.diagnostics) >= {
        "divergences", "mean_accept_prob", "step_size", "inv_mass_diag",
    }
