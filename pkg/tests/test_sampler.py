"""
Tests for the NUTS sampler, its adaptation, convergence diagnostics and the Bayes engine.
"""

import numpy as np
import pytest

from bdarma.core.engines import BayesEngine, EngineKind, SamplerConfig, get_engine
from bdarma.core.engines.bayes import sample_posterior
from bdarma.core.engines.diagnostics import (
    RHAT_WARN,
    convergence_warnings,
    effective_sample_size,
    per_coordinate,
    split_rhat,
    summarize,
)
from bdarma.core.engines.nuts import (
    DualAveraging,
    WelfordVariance,
    adaptation_windows,
    find_reasonable_step_size,
    initial_point,
    kinetic_energy,
    leapfrog,
    run_chain,
    safe_density,
)
from bdarma.core.model import MaskKind, ModelSpec, ParamLayout
from bdarma.exceptions import FitFailedError, NonFiniteError, UsageError


def standard_normal(q):
    return -0.5 * float(q @ q), -q


def correlated_normal(scales):
    precision = 1.0 / np.asarray(scales) ** 2

    def target(q):
        return -0.5 * float(np.sum(precision * q**2)), -precision * q

    return target


# -- Integrator -------------------------------------------------------------


class TestLeapfrog:
    def test_energy_error_shrinks_with_step(self):
        q0, p0 = np.array([1.0, -0.5]), np.array([0.3, 0.8])
        metric = np.ones(2)
        errors = []
        for step in (0.2, 0.1):
            q, p = q0, p0
            lp, grad = standard_normal(q)
            h0 = lp - kinetic_energy(p, metric)
            for _ in range(int(round(1.0 / step))):
                q, p, lp, grad = leapfrog(q, p, grad, step, metric, standard_normal)
            errors.append(abs(lp - kinetic_energy(p, metric) - h0))
        assert errors[1] < errors[0] / 3.0

    def test_reversible(self):
        q0, p0 = np.array([0.4, 1.2]), np.array([-0.7, 0.1])
        metric = np.array([1.0, 0.5])
        _, grad = standard_normal(q0)
        q1, p1, _, grad1 = leapfrog(q0, p0, grad, 0.3, metric, standard_normal)
        q2, p2, _, _ = leapfrog(q1, -p1, grad1, 0.3, metric, standard_normal)
        np.testing.assert_allclose(q2, q0, atol=1e-12)
        np.testing.assert_allclose(-p2, p0, atol=1e-12)

    def test_safe_density_maps_failures(self):
        def failing(q):
            raise NonFiniteError("boom", term="likelihood")

        lp, grad = safe_density(failing)(np.zeros(3))
        assert lp == -np.inf
        np.testing.assert_array_equal(grad, 0.0)


class TestAdaptation:
    def test_windows(self):
        start, end, ends = adaptation_windows(1000)
        assert (start, end) == (150, 900)
        assert ends[0] == 175
        assert ends[-1] == 900
        assert all(b > a for a, b in zip(ends, ends[1:]))

    def test_windows_for_short_warmup(self):
        start, end, ends = adaptation_windows(5)
        assert ends == [] or ends[-1] == end

    def test_welford(self, rng):
        x = rng.normal(size=(500, 3)) * [1.0, 2.0, 3.0]
        acc = WelfordVariance(3)
        for row in x:
            acc.add(row)
        n = 500
        expected = (n / (n + 5.0)) * x.var(axis=0, ddof=1) + 1e-3 * 5.0 / (n + 5.0)
        np.testing.assert_allclose(acc.regularized_variance(), expected, rtol=1e-10)

    def test_dual_averaging_shrinks_on_rejections(self):
        adapter = DualAveraging(0.8)
        adapter.restart(1.0)
        for _ in range(50):
            step = adapter.update(0.0)
        assert step < 1.0

    def test_reasonable_step_size(self, rng):
        target = correlated_normal([0.01, 0.01])
        q = np.array([0.01, 0.0])
        lp, grad = target(q)
        step = find_reasonable_step_size(q, lp, grad, np.ones(2), target, rng)
        assert step < 0.1


class TestRunChain:
    def test_standard_normal_moments(self):
        rng = np.random.default_rng(3)
        result = run_chain(standard_normal, 2, rng, n_warmup=300, n_samples=1000)
        assert result.samples.shape == (1000, 2)
        np.testing.assert_allclose(result.samples.mean(axis=0), 0.0, atol=0.15)
        np.testing.assert_allclose(result.samples.var(axis=0), 1.0, atol=0.25)
        assert 0.6 < result.accept_stat.mean() < 0.99
        assert not result.divergent.any()

    def test_metric_adapts_to_scales(self):
        target = correlated_normal([1.0, 10.0])
        result = run_chain(target, 2, np.random.default_rng(4), n_warmup=400, n_samples=200)
        assert result.inv_metric[1] / result.inv_metric[0] > 20.0

    def test_deterministic_for_seed(self):
        a = run_chain(standard_normal, 2, np.random.default_rng(5), n_warmup=50, n_samples=50)
        b = run_chain(standard_normal, 2, np.random.default_rng(5), n_warmup=50, n_samples=50)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_no_finite_start(self):
        def nowhere(q):
            return -np.inf, np.zeros_like(q)

        with pytest.raises(FitFailedError):
            run_chain(nowhere, 2, np.random.default_rng(0), n_warmup=1, n_samples=1)


# -- Diagnostics ------------------------------------------------------------


class TestDiagnostics:
    def test_constant_chains(self):
        chains = np.zeros((4, 100))
        assert split_rhat(chains) == 1.0
        assert effective_sample_size(chains) == 400.0

    def test_mixed_chains(self, rng):
        chains = rng.normal(size=(4, 500))
        assert split_rhat(chains) < 1.01
        assert effective_sample_size(chains) > 1000

    def test_stuck_chain(self, rng):
        chains = rng.normal(size=(4, 500))
        chains[0] += 3.0
        assert split_rhat(chains) > RHAT_WARN

    def test_per_coordinate_requires_equal_chains(self):
        with pytest.raises(ValueError):
            per_coordinate(np.zeros((5, 2)), np.array([0, 0, 0, 1, 1]), split_rhat)

    def test_warnings(self):
        found = convergence_warnings(np.array([1.0, 1.2]), ["a", "b"], n_divergent=30, n_draws=1000)
        assert len(found) == 2
        assert "b" in found[1]
        assert convergence_warnings(np.array([1.0, 1.01]), ["a", "b"], 0, 1000) == []

    def test_summarize(self, rng):
        draws = rng.normal(size=(400, 2))
        frame = summarize(draws, ["x", "y"], levels=(0.95, 0.8), chain=np.repeat(np.arange(4), 100))
        assert list(frame.columns) == ["mean", "sd", "q2.5", "q97.5", "q10", "q90", "rhat", "ess"]
        assert frame.loc["x", "q2.5"] == pytest.approx(np.quantile(draws[:, 0], 0.025))

    def test_summarize_interpolates_linearly(self):
        frame = summarize(np.arange(1.0, 101.0)[:, None], ["x"])
        assert frame.loc["x", "q2.5"] == pytest.approx(3.475, abs=1e-12)
        assert frame.loc["x", "q97.5"] == pytest.approx(97.525, abs=1e-12)
        assert frame.loc["x", "mean"] == pytest.approx(50.5)


# -- Bayes engine -----------------------------------------------------------

QUICK = SamplerConfig(chains=2, warmup=150, samples=150, seed=11)


class TestSamplerConfig:
    def test_defaults(self):
        config = SamplerConfig()
        assert (config.chains, config.warmup, config.samples) == (4, 1000, 1000)
        assert config.init_range == 1.0

    def test_initial_draws_stay_in_range(self):
        rng = np.random.default_rng(8)
        points = np.array([initial_point(standard_normal, 3, rng)[0] for _ in range(200)])
        assert np.abs(points).max() <= 1.0

    def test_rejects_non_positive_range(self):
        with pytest.raises(ValueError):
            SamplerConfig(init_range=0.0)


class TestSamplePosterior:
    def test_masked_slots_stay_zero(self, var1_series):
        spec = ModelSpec(n_components=3, ar_mask=MaskKind.DIAGONAL)
        draws = sample_posterior(spec, var1_series, QUICK, threads=1)
        layout = ParamLayout(spec)
        assert draws.draws.shape == (300, layout.size)
        np.testing.assert_array_equal(draws.draws[:, ~layout.free], 0.0)
        assert np.all(draws.draws[:, layout.gamma_slice] > 0)
        np.testing.assert_array_equal(draws.chain, np.repeat([0, 1], 150))

    def test_thread_count_does_not_change_draws(self, var1_series, var1_spec):
        one = sample_posterior(var1_spec, var1_series, QUICK, threads=1)
        two = sample_posterior(var1_spec, var1_series, QUICK, threads=2)
        np.testing.assert_array_equal(one.draws, two.draws)

    def test_summary_frame(self, var1_series, var1_spec):
        draws = get_engine(EngineKind.BAYES, sampler=QUICK, threads=1).fit(var1_spec, var1_series)
        frame = draws.summary_frame()
        assert list(frame.index) == ParamLayout(var1_spec).names
        assert {"mean", "q2.5", "q97.5", "rhat", "ess"} <= set(frame.columns)
        assert draws.intervals().shape == (len(frame), 2)
        assert draws.summary()["chains"] == 2

    def test_too_short(self, var1_spec, var1_series):
        with pytest.raises(UsageError):
            BayesEngine(QUICK).fit(var1_spec, var1_series.truncate(1))

    @pytest.mark.slow
    def test_recovers_truth(self, var1_series, var1_spec, var1_truth):
        config = SamplerConfig(chains=4, warmup=500, samples=500, seed=2)
        draws = sample_posterior(var1_spec, var1_series, config)
        truth = var1_truth.to_vector(var1_spec)
        lower, upper = draws.intervals(0.99).T
        covered = (lower <= truth) & (truth <= upper)
        assert covered.mean() >= 0.8
        assert draws.diagnostics.max_rhat < RHAT_WARN
