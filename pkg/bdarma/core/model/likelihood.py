"""Conditional VARMA recursion and the Dirichlet likelihood with its gradient.

For t > m = max(P, Q):

    eta_t = X_t beta + sum_p A_p (a_{t-p} - c X_{t-p} beta) + sum_q B_q e_{t-q}
    e_t   = a_t - eta_t,      a_t = link(y_t)
    log phi_t = z_t gamma     (clamped to [-30, 30])

with c = 1 for the centered parameterization and 0 otherwise. The first m
steps are conditioned on: eta_t = a_t, e_t = 0, and they contribute nothing
to the likelihood. The gradient is computed in reverse mode through the
recursion, so it is exact up to rounding.
"""

import logging
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from bdarma.core.model.layout import ParamLayout, ParamVector, as_theta
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec, Parameterization
from bdarma.core.simplex import dirichlet_logpdf_array, dirichlet_score_array
from bdarma.exceptions import NonFiniteError, UsageError

logger = logging.getLogger(__name__)

LOG_SCALE_BOUND = 30.0

ThetaLike = Union[np.ndarray, ParamVector]


class VarmaPath(NamedTuple):
    """Forward pass of the recursion over the observed window."""

    eta: np.ndarray  # (T, J-1)
    innovations: np.ndarray  # (T, J-1), zero for t <= m
    regression: np.ndarray  # (T, J-1), rows X_t beta


class VarmaRecursion:
    """Linear predictor path of a spec over a fixed series.

    Everything that does not depend on theta (link coordinates, covariate
    rows) is computed once here.
    """

    def __init__(self, spec: ModelSpec, series: CompositionalSeries):
        series.check_spec(spec)
        self.spec = spec
        self.layout = ParamLayout(spec)
        self.link = spec.link_map()
        self.y = series.observations
        self.a = self.link.forward(self.y)
        self.x = series.mean_covariates(spec)
        self.z = series.scale_covariates(spec)
        self.n_times = series.n_times
        self.max_lag = spec.max_lag
        self.center = 1.0 if spec.parameterization is Parameterization.CENTERED else 0.0

    @property
    def n_effective(self) -> int:
        """Number of time steps that enter the likelihood, T - m."""
        return max(0, self.n_times - self.max_lag)

    def forward(self, theta: np.ndarray) -> VarmaPath:
        ar, ma, beta, _ = self.layout.split(theta)
        a, T, m, c = self.a, self.n_times, self.max_lag, self.center
        regression = self.x @ beta.T
        eta = a.copy()
        innovations = np.zeros_like(a)
        if T <= m:
            return VarmaPath(eta, innovations, regression)

        base = regression[m:].copy()
        for p in range(ar.shape[0]):
            lag = p + 1
            base += (a[m - lag : T - lag] - c * regression[m - lag : T - lag]) @ ar[p].T

        if ma.shape[0] == 0:
            eta[m:] = base
            innovations[m:] = a[m:] - base
        else:
            for i, t in enumerate(range(m, T)):
                value = base[i].copy()
                for q in range(ma.shape[0]):
                    value += ma[q] @ innovations[t - q - 1]
                eta[t] = value
                innovations[t] = a[t] - value
        return VarmaPath(eta, innovations, regression)

    def backward(self, theta: np.ndarray, path: VarmaPath, grad_eta: np.ndarray) -> np.ndarray:
        """Pull a gradient with respect to eta_{m+1..T} back to the A, B and beta slots.

        Args:
            theta: Full parameter vector used for ``path``
            path: Output of ``forward(theta)``
            grad_eta: Array (T, J-1); rows t <= m are ignored

        Returns:
            Gradient over the full layout (gamma slots left at zero)
        """
        ar, ma, _, _ = self.layout.split(theta)
        a, T, m, c = self.a, self.n_times, self.max_lag, self.center
        grad = np.zeros(self.layout.size)
        if T <= m:
            return grad
        n_ma = ma.shape[0]

        if n_ma == 0:
            adjoint = grad_eta[m:]
        else:
            # eta_t feeds eta_{t+q} through e_t = a_t - eta_t
            padded = np.zeros((T + n_ma, a.shape[1]))
            for t in range(T - 1, m - 1, -1):
                value = grad_eta[t].copy()
                for q in range(n_ma):
                    value -= ma[q].T @ padded[t + q + 1]
                padded[t] = value
            adjoint = padded[m:T]

        d = self.layout.dim
        grad_ar = np.zeros_like(ar)
        for p in range(ar.shape[0]):
            lag = p + 1
            lagged = a[m - lag : T - lag] - c * path.regression[m - lag : T - lag]
            grad_ar[p] = adjoint.T @ lagged
        grad_ma = np.zeros_like(ma)
        for q in range(n_ma):
            lag = q + 1
            grad_ma[q] = adjoint.T @ path.innovations[m - lag : T - lag]

        regression_adjoint = np.zeros((T, d))
        regression_adjoint[m:] = adjoint
        if c:
            for p in range(ar.shape[0]):
                lag = p + 1
                regression_adjoint[m - lag : T - lag] -= adjoint @ ar[p]
        grad_beta = regression_adjoint.T @ self.x

        grad[self.layout.ar_slice] = grad_ar.ravel()
        grad[self.layout.ma_slice] = grad_ma.ravel()
        grad[self.layout.beta_slice] = grad_beta.ravel()
        grad[~self.layout.free] = 0.0
        return grad


class DarmaLikelihood(VarmaRecursion):
    """Conditional Dirichlet log-likelihood of a series under a spec."""

    def log_scale_path(self, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(clamped z_t gamma, mask of clamped steps)."""
        _, _, _, gamma = self.layout.split(theta)
        linear = self.z @ gamma if gamma.size else np.zeros(self.n_times)
        clamped = np.abs(linear) > LOG_SCALE_BOUND
        return np.clip(linear, -LOG_SCALE_BOUND, LOG_SCALE_BOUND), clamped

    def pointwise(self, theta: np.ndarray) -> np.ndarray:
        """Per-step log-likelihood, zeros for the conditioned steps."""
        m = self.max_lag
        out = np.zeros(self.n_times)
        if self.n_times <= m:
            return out
        path = self.forward(theta)
        log_scale, _ = self.log_scale_path(theta)
        mean = self.link.inverse(path.eta[m:])
        out[m:] = dirichlet_logpdf_array(self.y[m:], mean, np.exp(log_scale[m:]))
        if not np.all(np.isfinite(out)):
            bad = int(np.flatnonzero(~np.isfinite(out))[0]) + 1
            raise NonFiniteError(f"log density is not finite at t={bad}", term="likelihood")
        return out

    def log_likelihood(self, theta: np.ndarray) -> float:
        return float(self.pointwise(theta).sum())

    def value_and_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        """Log-likelihood and its gradient over the full layout."""
        m, T = self.max_lag, self.n_times
        if T <= m:
            return 0.0, np.zeros(self.layout.size)
        path = self.forward(theta)
        log_scale, clamped = self.log_scale_path(theta)
        scale = np.exp(log_scale[m:])
        mean = self.link.inverse(path.eta[m:])
        value = float(np.sum(dirichlet_logpdf_array(self.y[m:], mean, scale)))
        if not np.isfinite(value):
            raise NonFiniteError("log density is not finite", term="likelihood")

        grad_mean, grad_log_scale = dirichlet_score_array(self.y[m:], mean, scale)
        grad_eta = np.zeros_like(path.eta)
        grad_eta[m:] = self.link.pullback(mean, grad_mean)
        grad = self.backward(theta, path, grad_eta)

        if self.layout.n_gamma:
            grad_log_scale = np.where(clamped[m:], 0.0, grad_log_scale)
            grad[self.layout.gamma_slice] = self.z[m:].T @ grad_log_scale
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("gradient is not finite", term="likelihood")
        return value, grad


# ---------------------------------------------------------------------------
# Functional entry points
# ---------------------------------------------------------------------------


def linear_predictor_path(
    spec: ModelSpec, theta: ThetaLike, series: CompositionalSeries
) -> Tuple[np.ndarray, np.ndarray]:
    """(eta_1..eta_T, e_1..e_T) over the observed window."""
    recursion = VarmaRecursion(spec, series)
    path = recursion.forward(as_theta(recursion.layout, theta))
    return path.eta, path.innovations


def linear_predictor(
    spec: ModelSpec,
    theta: ThetaLike,
    series: CompositionalSeries,
    t: int,
    eta_history: Optional[np.ndarray] = None,
) -> np.ndarray:
    """eta_t for a 1-based time index t in 1..T+1.

    Args:
        spec: Model specification
        theta: Parameter vector
        series: Observations; y_{t-1}, ..., y_{t-P} must be observed
        t: Time index
        eta_history: eta_1..eta_{t-1}; needed when Q > 0, computed from
            the series when omitted

    Raises:
        UsageError: t out of range or ``eta_history`` shorter than t - 1
    """
    recursion = VarmaRecursion(spec, series)
    layout = recursion.layout
    vector = as_theta(layout, theta)
    T, m = recursion.n_times, recursion.max_lag
    if not 1 <= t <= T + 1:
        raise UsageError(f"time index {t} outside 1..{T + 1}", t=t)
    if t <= m:
        return recursion.a[t - 1].copy()

    ar, ma, beta, _ = layout.split(vector)
    c = recursion.center
    x = series.mean_covariates(spec, np.arange(t - spec.ar_order, t + 1))
    regression = x @ beta.T  # rows for times t-P..t
    eta = regression[-1].copy()
    for p in range(spec.ar_order):
        lag = p + 1
        eta += ar[p] @ (recursion.a[t - lag - 1] - c * regression[-1 - lag])

    if spec.ma_order:
        if eta_history is None:
            history = recursion.forward(vector).eta
        else:
            history = np.asarray(eta_history, dtype=float)
            if history.shape[0] < t - 1:
                raise UsageError(
                    f"eta history holds {history.shape[0]} steps, need {t - 1}",
                    t=history.shape[0] + 1,
                )
        for q in range(spec.ma_order):
            s = t - q - 1  # 1-based time of the lagged innovation
            if s > m:
                eta += ma[q] @ (recursion.a[s - 1] - history[s - 1])
    return eta


def scale_value(spec: ModelSpec, theta: ThetaLike, series: CompositionalSeries, t: int) -> float:
    """phi_t = exp(z_t gamma), with z_t gamma clamped to [-30, 30]."""
    layout = ParamLayout(spec)
    _, _, _, gamma = layout.split(as_theta(layout, theta))
    z = series.scale_covariates(spec, np.array([t]))[0]
    linear = float(z @ gamma) if gamma.size else 0.0
    if abs(linear) > LOG_SCALE_BOUND:
        logger.warning(f"log scale {linear:.3g} at t={t} clamped to +/-{LOG_SCALE_BOUND:g}")
        linear = float(np.clip(linear, -LOG_SCALE_BOUND, LOG_SCALE_BOUND))
    return float(np.exp(linear))


def _checked_likelihood(spec: ModelSpec, series: CompositionalSeries) -> DarmaLikelihood:
    likelihood = DarmaLikelihood(spec, series)
    if likelihood.n_times <= likelihood.max_lag:
        raise UsageError(
            f"series of length {likelihood.n_times} leaves no step after "
            f"the first {likelihood.max_lag}",
            t=likelihood.max_lag + 1,
        )
    return likelihood


def log_likelihood(spec: ModelSpec, theta: ThetaLike, series: CompositionalSeries) -> float:
    """Sum over t = m+1..T of log Dir(y_t; phi_t mu_t)."""
    likelihood = _checked_likelihood(spec, series)
    return likelihood.log_likelihood(as_theta(likelihood.layout, theta))


def pointwise_log_likelihood(
    spec: ModelSpec, theta: ThetaLike, series: CompositionalSeries
) -> np.ndarray:
    """Per-step log density, shape (T,), zeros for t <= m."""
    likelihood = _checked_likelihood(spec, series)
    return likelihood.pointwise(as_theta(likelihood.layout, theta))


def log_likelihood_grad(
    spec: ModelSpec, theta: ThetaLike, series: CompositionalSeries
) -> Tuple[float, np.ndarray]:
    """Log-likelihood and its gradient over the full parameter layout."""
    likelihood = _checked_likelihood(spec, series)
    return likelihood.value_and_grad(as_theta(likelihood.layout, theta))
