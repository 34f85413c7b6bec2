"""
Unit tests for the VARMA recursion and the conditional Dirichlet likelihood.
"""

import numpy as np
import pytest
from scipy.special import gammaln

from bdarma.core.model import (
    CompositionalSeries,
    CovariateSpec,
    FourierTerm,
    MaskKind,
    ModelSpec,
    ParamLayout,
    Parameterization,
    TrendKind,
    center_to_uncentered,
    linear_predictor,
    linear_predictor_path,
    log_likelihood,
    log_likelihood_grad,
    pointwise_log_likelihood,
    scale_value,
)
from bdarma.core.model.likelihood import LOG_SCALE_BOUND
from bdarma.core.simplex import Link
from bdarma.exceptions import UsageError


def loop_log_likelihood(spec, theta, series):
    """Step-by-step transcription of the recursion and the Dirichlet density."""
    layout = ParamLayout(spec)
    ar, ma, beta, gamma = layout.split(theta)
    link = spec.link_map()
    y = series.observations
    a = link.forward(y)
    x = series.mean_covariates(spec)
    z = series.scale_covariates(spec)
    c = 1.0 if spec.parameterization is Parameterization.CENTERED else 0.0
    m = spec.max_lag
    e = np.zeros_like(a)
    total = 0.0
    for t in range(m, series.n_times):
        eta = beta @ x[t]
        for p in range(spec.ar_order):
            lag = t - p - 1
            eta = eta + ar[p] @ (a[lag] - c * (beta @ x[lag]))
        for q in range(spec.ma_order):
            eta = eta + ma[q] @ e[t - q - 1]
        e[t] = a[t] - eta
        alpha = np.exp(np.clip(z[t] @ gamma, -30, 30)) * link.inverse(eta)
        total += gammaln(alpha.sum()) - gammaln(alpha).sum() + ((alpha - 1) * np.log(y[t])).sum()
    return total


def finite_difference(f, theta, free_index, h=1e-6):
    grad = np.zeros_like(theta)
    for i in free_index:
        step = np.zeros_like(theta)
        step[i] = h
        grad[i] = (f(theta + step) - f(theta - step)) / (2 * h)
    return grad


SPECS = {
    "var1": ModelSpec(n_components=3, ar_order=1),
    "darma21": ModelSpec(n_components=4, ar_order=2, ma_order=1),
    "uncentered_ma": ModelSpec(
        n_components=3, ar_order=0, ma_order=2, parameterization=Parameterization.UNCENTERED
    ),
    "seasonal": ModelSpec(
        n_components=3,
        ar_order=1,
        mean_design=CovariateSpec(
            trend=TrendKind.LINEAR, fourier=[FourierTerm(period=7, harmonics=1)]
        ),
        scale_design=CovariateSpec(trend=TrendKind.LINEAR),
    ),
    "clr": ModelSpec(n_components=4, ar_order=1, link=Link.CLR, ar_mask=MaskKind.NEAREST_NEIGHBOR),
    "ilr": ModelSpec(n_components=3, ar_order=1, ma_order=1, link=Link.ILR),
}


@pytest.fixture(params=sorted(SPECS))
def spec(request):
    return SPECS[request.param]


@pytest.fixture
def series(spec):
    gen = np.random.default_rng(spec.n_components)
    return CompositionalSeries.from_array(gen.dirichlet(np.full(spec.n_components, 8.0), size=40))


class TestLogLikelihood:
    def test_matches_loop(self, spec, series, random_theta):
        theta = random_theta(spec, seed=3)
        assert log_likelihood(spec, theta, series) == pytest.approx(
            loop_log_likelihood(spec, theta, series), abs=1e-9
        )

    def test_pointwise(self, spec, series, random_theta):
        theta = random_theta(spec, seed=4)
        pointwise = pointwise_log_likelihood(spec, theta, series)
        assert pointwise.shape == (series.n_times,)
        np.testing.assert_array_equal(pointwise[: spec.max_lag], 0.0)
        assert pointwise.sum() == pytest.approx(log_likelihood(spec, theta, series), abs=1e-10)

    def test_gradient(self, spec, series, random_theta):
        layout = ParamLayout(spec)
        for seed in range(20):
            theta = random_theta(spec, seed=seed)
            _, grad = log_likelihood_grad(spec, theta, series)
            numeric = finite_difference(
                lambda th: log_likelihood(spec, th, series), theta, layout.free_index
            )
            np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-5)
            np.testing.assert_array_equal(grad[~layout.free], 0.0)

    def test_series_too_short(self, spec):
        flat = np.full((spec.max_lag, spec.n_components), 1.0 / spec.n_components)
        short = CompositionalSeries.from_array(flat)
        with pytest.raises(UsageError):
            log_likelihood(spec, ParamLayout(spec).zeros(), short)


class TestLinearPredictor:
    def test_conditioned_steps(self, darma11_spec, darma11_series, darma11_truth):
        theta = darma11_truth.to_vector(darma11_spec)
        eta, innovations = linear_predictor_path(darma11_spec, theta, darma11_series)
        a = darma11_spec.link_map().forward(darma11_series.observations)
        np.testing.assert_array_equal(eta[0], a[0])
        np.testing.assert_array_equal(innovations[0], 0.0)
        np.testing.assert_allclose(innovations[1:], a[1:] - eta[1:], atol=1e-14)

    @pytest.mark.parametrize("t", [1, 2, 30, 60])
    def test_single_step_matches_path(self, darma11_spec, darma11_series, darma11_truth, t):
        theta = darma11_truth.to_vector(darma11_spec)
        eta, _ = linear_predictor_path(darma11_spec, theta, darma11_series)
        predicted = linear_predictor(darma11_spec, theta, darma11_series, t)
        np.testing.assert_allclose(predicted, eta[t - 1], atol=1e-12)

    def test_one_step_ahead(self, darma11_spec, darma11_series, darma11_truth):
        theta = darma11_truth.to_vector(darma11_spec)
        T = darma11_series.n_times
        eta, innovations = linear_predictor_path(darma11_spec, theta, darma11_series)
        layout = ParamLayout(darma11_spec)
        ar, ma, beta, _ = layout.split(theta)
        a = darma11_spec.link_map().forward(darma11_series.observations)
        expected = beta[:, 0] + ar[0] @ a[-1] + ma[0] @ innovations[-1]
        predicted = linear_predictor(darma11_spec, theta, darma11_series, T + 1)
        np.testing.assert_allclose(predicted, expected, atol=1e-12)

    def test_out_of_range(self, darma11_spec, darma11_series, darma11_truth):
        theta = darma11_truth.to_vector(darma11_spec)
        with pytest.raises(UsageError) as info:
            linear_predictor(darma11_spec, theta, darma11_series, darma11_series.n_times + 2)
        assert info.value.t == darma11_series.n_times + 2

    def test_short_history(self, darma11_spec, darma11_series, darma11_truth):
        theta = darma11_truth.to_vector(darma11_spec)
        with pytest.raises(UsageError):
            linear_predictor(darma11_spec, theta, darma11_series, 10, eta_history=np.zeros((3, 2)))


class TestParameterizations:
    def test_centered_equals_uncentered_for_intercept_only(
        self, var1_spec, var1_series, var1_truth
    ):
        spec = var1_spec.model_copy(update={"ar_order": 2})
        layout = ParamLayout(spec)
        theta = np.zeros(layout.size)
        theta[layout.ar_slice] = [0.5, 0.1, -0.1, 0.4, 0.1, 0.0, 0.05, 0.1]
        theta[layout.beta_slice] = [0.4, -0.3]
        theta[layout.gamma_slice] = [np.log(200.0)]
        uncentered, theta_star = center_to_uncentered(spec, theta)
        assert uncentered.parameterization is Parameterization.UNCENTERED
        assert log_likelihood(uncentered, theta_star, var1_series) == pytest.approx(
            log_likelihood(spec, theta, var1_series), abs=1e-9
        )

    def test_time_varying_design_has_no_twin(self):
        spec = ModelSpec(n_components=3, mean_design=CovariateSpec(trend=TrendKind.LINEAR))
        with pytest.raises(UsageError):
            center_to_uncentered(spec, ParamLayout(spec).zeros())


class TestScale:
    def test_scale_value(self, var1_spec, var1_series, var1_truth):
        theta = var1_truth.to_vector(var1_spec)
        assert scale_value(var1_spec, theta, var1_series, 5) == pytest.approx(200.0)

    def test_clamped(self, var1_spec, var1_series):
        layout = ParamLayout(var1_spec)
        theta = layout.zeros()
        theta[layout.gamma_slice] = 40.0
        bound = np.exp(LOG_SCALE_BOUND)
        assert scale_value(var1_spec, theta, var1_series, 5) == pytest.approx(bound)
        _, grad = log_likelihood_grad(var1_spec, theta, var1_series)
        assert grad[layout.gamma_slice][0] == 0.0
