"""Posterior predictive forecasting by trajectory simulation.

Every parameter draw (or, for maximum likelihood fits, every copy of the
point estimate) drives one trajectory: the recursion is continued past T
with eta_{T+h} built from simulated shares, y_{T+h} is drawn from the
Dirichlet (or, for tVARMA, a Gaussian on the alr scale) and fed back into
the AR and MA lags. All draws advance together as arrays.

The point forecast is the average over draws of the mean mu_{T+h}; the
median and quantiles are taken over the simulated shares.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from bdarma.core.engines.base import FitResult
from bdarma.core.engines.tvarma import TvarmaResult, as_tvarma_spec, cholesky_from_params
from bdarma.core.model.design import design_matrix
from bdarma.core.model.layout import ParamLayout
from bdarma.core.model.likelihood import LOG_SCALE_BOUND
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec, Parameterization
from bdarma.core.simplex import dirichlet_sample_array
from bdarma.exceptions import UsageError

logger = logging.getLogger(__name__)

MA_SAMPLED = "sampled"
MA_ZERO = "zero"


class ForecastResult(BaseModel):
    """Simulated forecast paths for horizons 1..H.

    Attributes:
        times: 1-based time indices T+1..T+H
        dates: ISO dates of those indices
        point: Array (H, J), average over draws of mu_{T+h}
        eta_mean: Array (H, J-1), average over draws of eta_{T+h}
        trajectories: Array (S*, H, J) of simulated shares, or None
        means: Array (S*, H, J) of mu_{T+h} per draw, or None
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: ModelSpec
    times: np.ndarray
    dates: List[str]
    point: np.ndarray
    eta_mean: np.ndarray
    trajectories: Optional[np.ndarray] = None
    means: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return int(self.times.size)

    def _require_paths(self) -> np.ndarray:
        if self.trajectories is None:
            raise UsageError("forecast was run without keeping trajectories")
        return self.trajectories

    def point_forecast(self) -> np.ndarray:
        return self.point

    def median(self) -> np.ndarray:
        return np.quantile(self._require_paths(), 0.5, axis=0, method="linear")

    def quantiles(self, probs: Sequence[float]) -> np.ndarray:
        """Array (len(probs), H, J) of predictive quantiles of the shares."""
        return np.quantile(self._require_paths(), list(probs), axis=0, method="linear")

    def interval(self, level: float = 0.95) -> np.ndarray:
        tail = (1.0 - level) / 2.0
        return self.quantiles([tail, 1.0 - tail])

    def to_frame(self, levels: Sequence[float] = (0.95,)) -> pd.DataFrame:
        """Long table: one row per (t, component) with mean, median and interval bounds."""
        H, J = self.point.shape
        frame = pd.DataFrame(
            {
                "t": np.repeat(self.times, J),
                "date": np.repeat(self.dates, J),
                "component": np.tile(np.arange(1, J + 1), H),
                "mean": self.point.ravel(),
            }
        )
        if self.trajectories is not None:
            frame["median"] = self.median().ravel()
            for level in levels:
                tail = 100.0 * (1.0 - level) / 2.0
                lower, upper = self.interval(level)
                frame[f"q{tail:g}"] = lower.ravel()
                frame[f"q{100.0 - tail:g}"] = upper.ravel()
        return frame

    def residuals(self, actuals: np.ndarray) -> np.ndarray:
        """link(y_{T+h}) minus the average eta_{T+h}, shape (H, J-1)."""
        actuals = np.asarray(actuals, dtype=float)
        if actuals.shape != self.point.shape:
            raise UsageError(f"actuals have shape {actuals.shape}, forecasts {self.point.shape}")
        return self.spec.link_map().forward(actuals) - self.eta_mean

    def residuals_frame(self, actuals: np.ndarray) -> pd.DataFrame:
        resid = self.residuals(actuals)
        H, d = resid.shape
        return pd.DataFrame(
            {
                "t": np.repeat(self.times, d),
                "date": np.repeat(self.dates, d),
                "coordinate": np.tile(np.arange(1, d + 1), H),
                "residual": resid.ravel(),
            }
        )


def forecast(
    spec: ModelSpec,
    fit: FitResult,
    series: CompositionalSeries,
    horizon: int,
    rng: np.random.Generator,
    ma_innovations: str = MA_SAMPLED,
    n_paths: Optional[int] = None,
    keep_paths: bool = True,
) -> ForecastResult:
    """Simulate ``horizon`` steps past the end of ``series``.

    Args:
        spec: Model the fit belongs to
        fit: Posterior draws or a maximum likelihood result
        series: Training series the fit was computed on
        horizon: Number of steps S >= 1
        rng: Random generator; identical generators give identical forecasts
        ma_innovations: "sampled" feeds simulated innovations into the MA
            lags, "zero" sets future innovations to zero
        n_paths: Trajectories for point-estimate fits (default from the fit)
        keep_paths: Keep per-draw arrays (needed for quantiles)

    Raises:
        UsageError: Bad horizon, unknown innovation policy or a fit that
            does not match the model
    """
    if horizon < 1:
        raise UsageError(f"forecast horizon must be at least 1, got {horizon}")
    if ma_innovations not in (MA_SAMPLED, MA_ZERO):
        raise UsageError(f"unknown MA innovation policy {ma_innovations!r}")
    series.check_spec(spec)
    gaussian = isinstance(fit, TvarmaResult)
    if gaussian:
        spec = as_tvarma_spec(spec)
    layout = ParamLayout(spec)
    theta = fit.parameter_draws(n_paths)
    if theta.shape[1] != layout.size:
        raise UsageError(f"fit has {theta.shape[1]} parameters, the model expects {layout.size}")
    if np.any(~np.isfinite(theta)):
        raise UsageError("fit holds non-finite parameters")

    n_draws = theta.shape[0]
    d, J = layout.dim, spec.n_components
    P, Q, m = spec.ar_order, spec.ma_order, spec.max_lag
    c = 1.0 if spec.parameterization is Parameterization.CENTERED else 0.0
    ar, ma, beta, gamma = layout.split(theta)
    link = spec.link_map()
    T = series.n_times
    a_obs = link.forward(series.observations)
    x_all = design_matrix(spec.mean_design, np.arange(1, T + horizon + 1), series.trend_scale)
    future_times = series.future_times(horizon)
    z_future = design_matrix(spec.resolved_scale_design, future_times, series.trend_scale)
    lower = cholesky_from_params(fit.cholesky_params, d) if gaussian else None

    def regression(t0: int) -> np.ndarray:
        return np.einsum("k,sdk->sd", x_all[t0], beta)

    def observed(t0: int) -> np.ndarray:
        return np.broadcast_to(a_obs[t0], (n_draws, d))

    def next_eta(t0: int, a_lags, m_lags, e_lags) -> np.ndarray:
        eta = regression(t0)
        for p in range(P):
            eta += np.einsum("sij,sj->si", ar[:, p], a_lags[p] - c * m_lags[p])
        for q in range(Q):
            eta += np.einsum("sij,sj->si", ma[:, q], e_lags[q])
        return eta

    # lags hold the most recent value first
    if Q == 0:
        a_lags = [observed(T - 1 - p) for p in range(P)]
        m_lags = [regression(T - 1 - p) for p in range(P)]
        e_lags: List[np.ndarray] = []
    else:
        a_lags = [observed(m - 1 - p) for p in range(P)]
        m_lags = [regression(m - 1 - p) for p in range(P)]
        e_lags = [np.zeros((n_draws, d)) for _ in range(Q)]
        for t0 in range(m, T):
            eta = next_eta(t0, a_lags, m_lags, e_lags)
            a_lags = ([observed(t0)] + a_lags)[:P]
            m_lags = ([regression(t0)] + m_lags)[:P]
            e_lags = ([a_obs[t0] - eta] + e_lags)[:Q]

    point = np.zeros((horizon, J))
    eta_mean = np.zeros((horizon, d))
    trajectories = np.empty((n_draws, horizon, J)) if keep_paths else None
    means = np.empty((n_draws, horizon, J)) if keep_paths else None

    for h in range(horizon):
        t0 = T + h
        eta = next_eta(t0, a_lags, m_lags, e_lags)
        mu = link.inverse(eta)
        if gaussian:
            a_new = eta + rng.standard_normal((n_draws, d)) @ lower.T
            y = link.inverse(a_new)
        else:
            linear = gamma @ z_future[h] if gamma.shape[1] else np.zeros(n_draws)
            log_scale = np.clip(linear, -LOG_SCALE_BOUND, LOG_SCALE_BOUND)
            y = dirichlet_sample_array(np.exp(log_scale)[:, None] * mu, rng)
            a_new = link.forward(y)
        point[h] = mu.mean(axis=0)
        eta_mean[h] = eta.mean(axis=0)
        if keep_paths:
            trajectories[:, h] = y
            means[:, h] = mu
        innovation = a_new - eta if ma_innovations == MA_SAMPLED else np.zeros_like(eta)
        a_lags = ([a_new] + a_lags)[:P]
        m_lags = ([regression(t0)] + m_lags)[:P]
        e_lags = ([innovation] + e_lags)[:Q]

    logger.debug(f"Simulated {n_draws} trajectories over {horizon} steps")
    return ForecastResult(
        spec=spec,
        times=future_times,
        dates=series.dates(future_times),
        point=point,
        eta_mean=eta_mean,
        trajectories=trajectories,
        means=means,
    )
