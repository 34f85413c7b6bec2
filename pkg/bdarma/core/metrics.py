"""Forecast accuracy and parameter recovery metrics.

Forecast metrics pool the squared (or absolute) errors of every replicate
and horizon step per component; the ``Total`` row sums the per-component
values. Recovery metrics compare per-replicate point estimates and
intervals against the true parameter vector.
"""

from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from bdarma.exceptions import UsageError

TOTAL = "Total"


class MetricReport(BaseModel):
    """Per-component forecast errors and per-coordinate recovery statistics.

    Either half may be empty: ``forecast_metrics`` fills the forecast
    fields, ``recovery_metrics`` the recovery fields.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    components: List[str] = Field(default_factory=list)
    frmse: Optional[np.ndarray] = None
    fmae: Optional[np.ndarray] = None

    parameters: List[str] = Field(default_factory=list)
    bias: Optional[np.ndarray] = None
    rmse: Optional[np.ndarray] = None
    cil: Optional[np.ndarray] = None
    coverage: Optional[np.ndarray] = None
    n_replicates: int = 0

    @property
    def frmse_total(self) -> float:
        return float(np.sum(self.frmse)) if self.frmse is not None else float("nan")

    @property
    def fmae_total(self) -> float:
        return float(np.sum(self.fmae)) if self.fmae is not None else float("nan")

    def forecast_frame(self) -> pd.DataFrame:
        """FRMSE/FMAE table with one row per component plus ``Total``."""
        if self.frmse is None:
            raise UsageError("report holds no forecast metrics")
        frame = pd.DataFrame(
            {"frmse": self.frmse, "fmae": self.fmae},
            index=pd.Index(self.components, name="component"),
        )
        frame.loc[TOTAL] = [self.frmse_total, self.fmae_total]
        return frame

    def recovery_frame(self) -> pd.DataFrame:
        """Bias, RMSE, interval length and coverage per parameter."""
        if self.bias is None:
            raise UsageError("report holds no recovery metrics")
        return pd.DataFrame(
            {"bias": self.bias, "rmse": self.rmse, "cil": self.cil, "coverage": self.coverage},
            index=pd.Index(self.parameters, name="parameter"),
        )


def forecast_metrics(
    actuals: np.ndarray,
    forecasts: np.ndarray,
    components: Optional[Sequence[str]] = None,
) -> MetricReport:
    """FRMSE_j and FMAE_j over replicates and horizon steps.

    Args:
        actuals: Observed shares, shape (H, J) or (R, H, J)
        forecasts: Point forecasts of the same shape
        components: Row labels (default ``y1..yJ``)

    Raises:
        UsageError: Shapes differ or are not 2-D/3-D
    """
    actuals = np.asarray(actuals, dtype=float)
    forecasts = np.asarray(forecasts, dtype=float)
    if actuals.shape != forecasts.shape:
        raise UsageError(f"actuals have shape {actuals.shape}, forecasts {forecasts.shape}")
    if actuals.ndim not in (2, 3):
        raise UsageError(f"expected (H, J) or (R, H, J) arrays, got {actuals.ndim} dimensions")
    errors = (actuals - forecasts).reshape(-1, actuals.shape[-1])
    n_components = errors.shape[1]
    if components is None:
        components = [f"y{j}" for j in range(1, n_components + 1)]
    labels = list(components)
    if len(labels) != n_components:
        raise UsageError(f"{len(labels)} component labels for {n_components} components")
    return MetricReport(
        components=labels,
        frmse=np.sqrt(np.mean(errors**2, axis=0)),
        fmae=np.mean(np.abs(errors), axis=0),
        n_replicates=1 if actuals.ndim == 2 else actuals.shape[0],
    )


def recovery_metrics(
    estimates: np.ndarray,
    intervals: np.ndarray,
    truth: np.ndarray,
    parameters: Optional[Sequence[str]] = None,
) -> MetricReport:
    """Bias, RMSE, mean interval length and coverage across replicates.

    Args:
        estimates: Point estimates, shape (R, C)
        intervals: Interval bounds, shape (R, C, 2)
        truth: True values, shape (C,)
        parameters: Coordinate labels

    Replicates whose estimate is not finite (failed fits) are skipped per
    coordinate; a coordinate with no finite replicate reports NaN.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    intervals = np.asarray(intervals, dtype=float).reshape(estimates.shape + (2,))
    truth = np.asarray(truth, dtype=float)
    if truth.shape != estimates.shape[1:]:
        raise UsageError(f"truth has shape {truth.shape}, estimates {estimates.shape}")

    valid = np.isfinite(estimates)
    counts = valid.sum(axis=0)
    error = np.where(valid, estimates - truth, 0.0)
    lower, upper = intervals[..., 0], intervals[..., 1]
    width = np.where(valid, upper - lower, 0.0)
    inside = np.where(valid, (lower <= truth) & (truth <= upper), False)

    with np.errstate(invalid="ignore", divide="ignore"):
        bias = error.sum(axis=0) / counts
        rmse = np.sqrt((error**2).sum(axis=0) / counts)
        cil = width.sum(axis=0) / counts
        coverage = inside.sum(axis=0) / counts

    if parameters is None:
        parameters = [f"theta{c}" for c in range(1, truth.size + 1)]
    labels = list(parameters)
    return MetricReport(
        parameters=labels,
        bias=bias,
        rmse=rmse,
        cil=cil,
        coverage=coverage,
        n_replicates=int(estimates.shape[0]),
    )


def evaluate_forecast_frame(
    forecast_frame: pd.DataFrame, actuals_frame: pd.DataFrame
) -> pd.DataFrame:
    """FRMSE/FMAE table from a saved forecast CSV and an actuals CSV.

    ``forecast_frame`` is the long layout written by the forecast command
    (``t, date, component, mean, ...``); ``actuals_frame`` is a series
    table with ``component_1..component_J`` columns and either a ``t`` or
    a ``date`` column to align on.

    Raises:
        UsageError: A forecast step has no matching actual
    """
    point = forecast_frame.pivot(index="t", columns="component", values="mean").sort_index()
    component_columns = [c for c in actuals_frame.columns if str(c).startswith("component_")]
    if len(component_columns) != point.shape[1]:
        raise UsageError(
            f"actuals have {len(component_columns)} components, forecasts {point.shape[1]}"
        )
    if "t" in actuals_frame.columns:
        actual = actuals_frame.set_index("t")[component_columns]
        keys = point.index
    else:
        dates = forecast_frame.drop_duplicates("t").set_index("t")["date"].loc[point.index]
        actual = actuals_frame.set_index("date")[component_columns]
        keys = pd.Index(dates.values)
    missing = [k for k in keys if k not in actual.index]
    if missing:
        raise UsageError(f"no actual values for forecast step {missing[0]}")
    report = forecast_metrics(
        actual.loc[keys].to_numpy(dtype=float),
        point.to_numpy(dtype=float),
        components=[f"y{j}" for j in range(1, point.shape[1] + 1)],
    )
    return report.forecast_frame()
