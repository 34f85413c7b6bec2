"""Deterministic covariate rows: intercept, linear trend and Fourier seasonality."""

from typing import Sequence, Union

import numpy as np

from bdarma.core.model.spec import CovariateSpec, TrendKind


def design_matrix(
    spec: CovariateSpec,
    times: Union[Sequence[float], np.ndarray],
    trend_scale: float = 1.0,
) -> np.ndarray:
    """Covariate rows for a run of time indices.

    Args:
        spec: Which columns to build
        times: 1-based time indices (may extend past the observed window)
        trend_scale: Divisor of the trend column, normally T_train

    Returns:
        Array of shape (len(times), spec.n_columns)
    """
    t = np.asarray(times, dtype=float)
    columns = []
    if spec.intercept:
        columns.append(np.ones_like(t))
    if spec.trend is TrendKind.LINEAR:
        columns.append(t / trend_scale)
    for term in spec.fourier:
        for k in range(1, term.harmonics + 1):
            angle = 2.0 * np.pi * k * t / term.period
            columns.append(np.sin(angle))
            columns.append(np.cos(angle))
    if not columns:
        return np.zeros((t.shape[0], 0))
    return np.column_stack(columns)


def design_row(spec: CovariateSpec, t: float, trend_scale: float = 1.0) -> np.ndarray:
    """Covariate row x_t (or z_t) for one time index."""
    return design_matrix(spec, [t], trend_scale)[0]


def build_design(
    spec: CovariateSpec,
    t: float,
    n_components: int,
    trend_scale: float = 1.0,
) -> np.ndarray:
    """Block design X_t = I_{J-1} kron x_t of shape (J-1, (J-1) * r).

    With beta stored component-major, ``X_t @ beta`` gives the regression
    mean of every eta coordinate at time t.
    """
    row = design_row(spec, t, trend_scale)
    return np.kron(np.eye(n_components - 1), row[None, :])


def growth_rate_per_day(coefficient: float, trend_scale: float) -> float:
    """Per-day change of a trend coefficient fitted on the t / trend_scale column."""
    if trend_scale <= 0:
        raise ValueError(f"trend_scale must be positive, got {trend_scale}")
    return float(coefficient) / float(trend_scale)
