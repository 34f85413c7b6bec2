"""
Tests for Pareto-smoothed importance sampling and leave-future-out model selection.
"""

import arviz as az
import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from bdarma.core.engines import SamplerConfig
from bdarma.core.model import ModelSpec
from bdarma.core.selection import (
    LfoConfig,
    LfoReport,
    compare_models,
    fit_gpd_tail,
    gpd_quantile,
    lfo_elpd_exact,
    lfo_elpd_psis,
    psis_smooth,
)
from bdarma.exceptions import UsageError

# -- Pareto smoothing -------------------------------------------------------


class TestGeneralizedPareto:
    @pytest.mark.parametrize("k", [0.2, 0.5, 0.8])
    def test_shape_recovery(self, k):
        rng = np.random.default_rng(3)
        sample = stats.genpareto(c=k, scale=1.5).rvs(size=2000, random_state=rng)
        k_hat, sigma = fit_gpd_tail(sample)
        assert k_hat == pytest.approx(k, abs=0.1)
        assert sigma > 0

    def test_constant_tail(self):
        assert fit_gpd_tail(np.ones(10)) == (float("-inf"), 0.0)

    def test_too_few_values(self):
        with pytest.raises(UsageError):
            fit_gpd_tail(np.arange(4.0))

    @pytest.mark.parametrize("k", [-0.3, 0.0, 0.6])
    def test_quantile_matches_scipy(self, k):
        probs = np.array([0.05, 0.5, 0.95])
        expected = stats.genpareto(c=k, scale=2.0).ppf(probs)
        np.testing.assert_allclose(gpd_quantile(probs, k, 2.0), expected, rtol=1e-10)

    def test_quantile_bounds(self):
        out = gpd_quantile(np.array([0.0, 1.0]), -0.5, 1.0)
        np.testing.assert_allclose(out, [0.0, 2.0])
        assert np.all(np.isnan(gpd_quantile(np.array([0.5]), 0.2, 0.0)))


class TestPsisSmooth:
    def test_normalized(self, rng):
        log_weights, k = psis_smooth(rng.normal(0.0, 1.0, 1000))
        assert np.exp(log_weights).sum() == pytest.approx(1.0)
        assert np.isfinite(k)
        assert k < 0.7

    def test_heavy_tail_is_flagged(self, rng):
        _, k = psis_smooth(np.log1p(rng.pareto(1.0, 2000)))
        assert k > 0.7

    def test_constant_weights(self):
        log_weights, k = psis_smooth(np.zeros(100))
        assert k == float("-inf")
        np.testing.assert_allclose(log_weights, -np.log(100))

    def test_short_input_is_only_normalized(self):
        raw = np.linspace(-1.0, 1.0, 10)
        log_weights, k = psis_smooth(raw)
        assert k == float("inf")
        np.testing.assert_allclose(np.exp(log_weights), np.exp(raw) / np.exp(raw).sum())

    def test_matches_arviz(self, rng):
        raw = np.log1p(rng.pareto(1.0, 2000))
        expected, k_expected = az.psislw(raw.copy())
        log_weights, k = psis_smooth(raw)
        np.testing.assert_allclose(log_weights, expected, rtol=1e-12)
        assert k == pytest.approx(float(k_expected), rel=1e-12)

    def test_common_shift_leaves_predictive_unchanged(self, rng):
        raw = np.log1p(rng.pareto(1.5, 1000))
        block = rng.normal(-2.0, 0.5, 1000)
        base, k_base = psis_smooth(raw)
        shifted, k_shifted = psis_smooth(raw + 7.3)
        np.testing.assert_allclose(shifted, base, atol=1e-12)
        assert k_shifted == pytest.approx(k_base, abs=1e-12)
        assert logsumexp(shifted + block) == pytest.approx(logsumexp(base + block), abs=1e-12)

    def test_keeps_order_of_raw_weights(self, rng):
        raw = np.log1p(rng.pareto(1.0, 2000))
        log_weights, _ = psis_smooth(raw)
        order = np.argsort(raw, kind="stable")
        assert np.all(np.diff(log_weights[order]) >= -1e-12)

    @pytest.mark.parametrize("bad", [np.array([]), np.array([0.0, np.inf]), np.zeros((2, 2))])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(UsageError):
            psis_smooth(bad)


# -- Leave-future-out -------------------------------------------------------


def report(name, pointwise, times=None):
    pointwise = np.asarray(pointwise, dtype=float)
    times = np.arange(10, 10 + pointwise.size) if times is None else np.asarray(times)
    return LfoReport(model=name, times=times, pointwise=pointwise, k_hat=np.zeros(pointwise.size))


class TestLfoConfig:
    def test_default_history(self):
        assert LfoConfig().resolve_min_history(100, 1) == 50

    def test_history_must_exceed_lag(self):
        with pytest.raises(UsageError):
            LfoConfig(min_history=2).resolve_min_history(100, 2)

    def test_series_too_short(self):
        with pytest.raises(UsageError):
            LfoConfig(min_history=99, steps_ahead=2).resolve_min_history(100, 1)


class TestCompareModels:
    def test_ranking(self):
        frame = compare_models(
            {"small": report("small", [-1.0, -2.0, -1.5]), "big": report("big", [-0.5, -1.0, -1.5])}
        )
        assert list(frame.index) == ["big", "small"]
        assert frame.loc["big", "elpd_diff"] == 0.0
        assert frame.loc["small", "elpd_diff"] == pytest.approx(1.5)
        diff = np.array([0.5, 1.0, 0.0])
        assert frame.loc["small", "diff_se"] == pytest.approx(np.sqrt(3 * diff.var()))

    def test_different_splits(self):
        reports = {"a": report("a", [-1.0, -1.0]), "b": report("b", [-2.0, -2.0], [20, 21])}
        frame = compare_models(reports)
        assert np.isnan(frame.loc["b", "diff_se"])

    def test_diff_is_never_negative(self):
        reports = {
            "low": report("low", [-2.0, -2.5, -1.0]),
            "high": report("high", [-1.0, -1.5, -0.5]),
            "mid": report("mid", [-1.5, -2.0, -0.5]),
        }
        frame = compare_models(reports)
        assert list(frame.index) == ["high", "mid", "low"]
        assert (frame["elpd_diff"] >= 0).all()
        assert frame.loc["low", "elpd_diff"] == pytest.approx(frame.loc["high", "elpd"] + 5.5)

    def test_empty(self):
        with pytest.raises(UsageError):
            compare_models({})

    def test_report_frame(self):
        single = report("m", [-1.0, -3.0])
        single.refit_times.append(10)
        frame = single.to_frame()
        assert list(frame["refit"]) == [True, False]
        assert single.elpd == -4.0
        assert single.se == pytest.approx(np.sqrt(2.0))


@pytest.mark.slow
class TestLfoRuns:
    SAMPLER = SamplerConfig(chains=2, warmup=100, samples=100, seed=6)

    def test_zero_threshold_matches_exact(self, var1_series):
        spec = ModelSpec(n_components=3)
        series = var1_series.truncate(40)
        config = LfoConfig(min_history=36, k_threshold=0.0)
        psis = lfo_elpd_psis(spec, series, config, self.SAMPLER, threads=1)
        exact = lfo_elpd_exact(spec, series, config, self.SAMPLER, threads=2)
        assert psis.refit_times == [36, 37, 38, 39]
        np.testing.assert_allclose(psis.pointwise, exact.pointwise, rtol=1e-12)

    def test_refits_follow_k_hat(self, var1_series):
        spec = ModelSpec(n_components=3)
        series = var1_series.truncate(60)
        result = lfo_elpd_psis(spec, series, LfoConfig(min_history=50), self.SAMPLER, threads=1)
        assert result.refit_times[0] == 50
        assert np.isnan(result.k_hat[0])
        refits = np.isin(result.times, result.refit_times)[1:]
        assert np.all(result.k_hat[1:][refits] > 0.7)
        assert np.all(result.k_hat[1:][~refits] <= 0.7)
        assert np.all(np.isfinite(result.pointwise))

    def test_psis_tracks_exact_on_long_series(self, var1_series):
        spec = ModelSpec(n_components=3)
        series = var1_series.truncate(200)
        config = LfoConfig(min_history=192)
        psis = lfo_elpd_psis(spec, series, config, self.SAMPLER, threads=1)
        exact = lfo_elpd_exact(spec, series, config, self.SAMPLER, threads=2)
        np.testing.assert_array_equal(psis.times, exact.times)
        assert abs(psis.elpd - exact.elpd) <= 2 * exact.se
        assert psis.refit_times == sorted(set(psis.refit_times))
