"""Simplex transforms, the DARMA model, fitting engines, forecasting, selection and studies."""

from .engines import EngineKind, get_engine
from .forecast import ForecastResult, forecast
from .metrics import MetricReport, evaluate_forecast_frame, forecast_metrics, recovery_metrics
from .model import CompositionalSeries, ModelSpec

__all__ = [
    "EngineKind",
    "get_engine",
    "ForecastResult",
    "forecast",
    "MetricReport",
    "evaluate_forecast_frame",
    "forecast_metrics",
    "recovery_metrics",
    "CompositionalSeries",
    "ModelSpec",
]
