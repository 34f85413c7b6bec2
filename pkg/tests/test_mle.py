"""
Tests for the maximum likelihood engines: DARMA MLE and the Gaussian tVARMA baseline.
"""

import numpy as np
import pytest

from bdarma.core.engines import EngineKind, OptimizerConfig, get_engine
from bdarma.core.engines.mle import (
    MAX_ITERATIONS,
    DarmaMleEngine,
    central_difference_hessian,
    covariance_from_hessian,
    fit_mle_darma,
)
from bdarma.core.engines.tvarma import (
    DEGENERATE_DESIGN,
    GaussianVarmaLikelihood,
    TvarmaEngine,
    cholesky_from_params,
    fit_tvarma,
    fit_tvarma_spec,
    params_from_cholesky,
    sigma_summary,
    tvarma_spec,
)
from bdarma.core.model import (
    CompositionalSeries,
    ModelSpec,
    ParamLayout,
    Parameterization,
    log_likelihood_grad,
)
from bdarma.core.simplex import alr
from bdarma.core.study import DgmConfig, DgmKind, TrueParams
from bdarma.core.study.dgm import simulate_replicate
from bdarma.exceptions import FitFailedError, UsageError


@pytest.fixture
def tvarma_series():
    spec = tvarma_spec(3, ar_order=1, ma_order=1)
    truth = TrueParams(
        ar=[[[0.5, 0.1], [0.0, 0.4]]],
        ma=[[[0.3, 0.0], [0.0, 0.2]]],
        beta=[[0.2], [-0.1]],
        sigma=[0.1, 0.15],
        rho=0.3,
    )
    config = DgmConfig(dgm=DgmKind.TVARMA, dgm_spec=spec, true_params=truth, t_total=400, seed=5)
    return simulate_replicate(config, 0)[0], spec, truth


class TestHessian:
    def test_quadratic_is_exact(self):
        matrix = np.array([[-2.0, 0.5], [0.5, -1.0]])
        hessian = central_difference_hessian(lambda x: matrix @ x, np.array([0.3, -2.0]), 1e-4)
        np.testing.assert_allclose(hessian, matrix, atol=1e-8)
        expected = np.linalg.inv(-matrix)
        np.testing.assert_allclose(covariance_from_hessian(hessian), expected, atol=1e-8)

    def test_not_negative_definite(self):
        assert covariance_from_hessian(np.eye(2)) is None


class TestDarmaMle:
    def test_recovers_truth(self, var1_spec, var1_series, var1_truth):
        result = fit_mle_darma(var1_spec, var1_series, OptimizerConfig(seed=1))
        assert result.converged
        truth = var1_truth.to_vector(var1_spec)
        se = result.standard_errors
        assert np.all(se > 0)
        assert np.all(np.abs(result.estimate - truth) < 5.0 * se)
        lower, upper = result.intervals(0.95).T
        assert np.all(lower < result.estimate) and np.all(result.estimate < upper)

    def test_gradient_vanishes_at_optimum(self, var1_spec, var1_series):
        result = fit_mle_darma(var1_spec, var1_series)
        _, grad = log_likelihood_grad(var1_spec, result.estimate, var1_series)
        assert np.max(np.abs(grad)) < 1e-3

    def test_masked_slots(self, var1_series):
        spec = ModelSpec(n_components=3, ar_mask="diagonal")
        result = fit_mle_darma(spec, var1_series)
        layout = ParamLayout(spec)
        np.testing.assert_array_equal(result.estimate[~layout.free], 0.0)
        np.testing.assert_array_equal(result.covariance[~layout.free], 0.0)

    def test_parameter_draws_repeat_estimate(self, var1_spec, var1_series):
        result = fit_mle_darma(var1_spec, var1_series, OptimizerConfig(n_paths=7))
        draws = result.parameter_draws()
        assert draws.shape == (7, result.estimate.size)
        np.testing.assert_array_equal(draws[3], result.estimate)

    def test_failure_is_reported(self, var1_spec, var1_series):
        config = OptimizerConfig(max_iter=1, retries=2)
        result = fit_mle_darma(var1_spec, var1_series, config)
        assert not result.converged
        assert result.reasons == [MAX_ITERATIONS] * 3
        assert result.attempts == 3
        with pytest.raises(FitFailedError) as info:
            DarmaMleEngine(config).fit(var1_spec, var1_series)
        assert info.value.reasons == [MAX_ITERATIONS] * 3

    def test_deterministic(self, var1_spec, var1_series):
        a = fit_mle_darma(var1_spec, var1_series, OptimizerConfig(seed=4))
        b = fit_mle_darma(var1_spec, var1_series, OptimizerConfig(seed=4))
        np.testing.assert_array_equal(a.estimate, b.estimate)

    def test_reference_relabeling_keeps_maximum(self, var1_spec, var1_series):
        # moving component 1 to the end makes it the alr reference
        series = var1_series.truncate(150)
        relabeled = CompositionalSeries.from_array(series.observations[:, [1, 2, 0]])
        config = OptimizerConfig(seed=2)
        base = fit_mle_darma(var1_spec, series, config)
        other = fit_mle_darma(var1_spec, relabeled, config)
        assert base.converged and other.converged
        assert other.log_likelihood == pytest.approx(base.log_likelihood, abs=1e-4)

    def test_too_short(self, var1_spec, var1_series):
        with pytest.raises(UsageError):
            fit_mle_darma(var1_spec, var1_series.truncate(1))


class TestCholesky:
    def test_round_trip(self):
        lower = np.array([[0.5, 0.0], [0.2, 0.3]])
        params = params_from_cholesky(lower)
        np.testing.assert_allclose(cholesky_from_params(params, 2), lower)

    def test_sigma_summary(self):
        lower = np.array([[0.5, 0.0], [0.2, 0.3]])
        sigma = lower @ lower.T
        sd = np.sqrt(np.diag(sigma))
        expected = [sd[0], sd[1], sigma[0, 1] / (sd[0] * sd[1])]
        np.testing.assert_allclose(sigma_summary(params_from_cholesky(lower), 2), expected)

    def test_gradient(self, tvarma_series):
        series, spec, truth = tvarma_series
        model = GaussianVarmaLikelihood(spec, series.truncate(60))
        theta = truth.to_vector(spec)
        chol = params_from_cholesky(np.array([[0.12, 0.0], [0.03, 0.14]]))
        _, grad_theta, grad_chol = model.value_and_grad(theta, chol)
        h = 1e-6
        for c in range(chol.size):
            step = np.zeros_like(chol)
            step[c] = h
            upper = model.value_and_grad(theta, chol + step)[0]
            lower = model.value_and_grad(theta, chol - step)[0]
            numeric = (upper - lower) / (2 * h)
            assert grad_chol[c] == pytest.approx(numeric, rel=1e-5, abs=1e-4)
        layout = ParamLayout(spec)
        for i in layout.free_index:
            step = np.zeros_like(theta)
            step[i] = h
            upper = model.value_and_grad(theta + step, chol)[0]
            lower = model.value_and_grad(theta - step, chol)[0]
            numeric = (upper - lower) / (2 * h)
            assert grad_theta[i] == pytest.approx(numeric, rel=1e-5, abs=1e-4)


class TestTvarma:
    def test_least_squares_matches_ols(self, var1_series):
        result = fit_tvarma(var1_series, ar_order=1)
        assert result.converged
        a = np.asarray(alr(var1_series.observations))
        design = np.column_stack([a[:-1], np.ones(a.shape[0] - 1)])
        coef, *_ = np.linalg.lstsq(design, a[1:], rcond=None)
        layout = ParamLayout(result.spec)
        ar, _, beta, _ = layout.split(result.estimate)
        np.testing.assert_allclose(ar[0], coef[:2].T, atol=1e-6)
        np.testing.assert_allclose(beta[:, 0], coef[2], atol=1e-6)
        residuals = a[1:] - design @ coef
        expected = residuals.T @ residuals / residuals.shape[0]
        np.testing.assert_allclose(result.sigma, expected, atol=1e-6)

    def test_sigma_names(self, var1_series):
        result = fit_tvarma(var1_series)
        assert result.sigma_names == ["sigma[1]", "sigma[2]", "rho[1,2]"]
        assert np.all(result.sigma_standard_errors() > 0)
        assert result.spec.resolved_scale_design.n_columns == 0

    def test_constant_coordinate_is_degenerate(self):
        # y_2 == y_3, so the second alr coordinate is exactly zero
        share = np.linspace(0.05, 0.1, 50)
        values = np.column_stack([1.0 - 2.0 * share, share, share])
        series = CompositionalSeries.from_array(values)
        result = fit_tvarma(series)
        assert not result.converged
        assert result.degenerate
        assert result.reasons == [DEGENERATE_DESIGN]
        with pytest.raises(FitFailedError):
            TvarmaEngine().fit(tvarma_spec(3), series)

    @pytest.mark.slow
    def test_bfgs_recovers_varma(self, tvarma_series):
        series, spec, truth = tvarma_series
        result = fit_tvarma_spec(spec, series, OptimizerConfig(seed=3))
        assert result.converged
        se = result.standard_errors
        free = ParamLayout(spec).free_index
        error = np.abs(result.estimate - truth.to_vector(spec))[free]
        assert np.all(error < 5.0 * se[free])
        np.testing.assert_allclose(result.sigma_estimates()[:2], truth.sigma, rtol=0.15)

    def test_centered_uses_bfgs(self, var1_series):
        result = get_engine(EngineKind.TVARMA, optimizer=OptimizerConfig(seed=2)).fit(
            tvarma_spec(3, parameterization=Parameterization.CENTERED), var1_series
        )
        reference = fit_tvarma(var1_series)
        assert result.log_likelihood == pytest.approx(reference.log_likelihood, abs=1e-4)
