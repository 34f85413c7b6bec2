"""bdarma - Bayesian Dirichlet ARMA models for compositional time series.

Fits Dirichlet observation models whose alr-scale mean follows a VARMA
recursion, by NUTS sampling or maximum likelihood, next to a Gaussian
VARMA baseline on log-ratio data. Forecasts, leave-future-out model
selection and replicated simulation studies build on the same fits.

Logging Configuration:
    bdarma configures its logger on import with a short user-friendly
    format.

    Environment Variables:
        BDARMA_LOG_LEVEL: Log level (DEBUG, INFO, WARNING, ERROR)
        BDARMA_LOG_FORMAT: Log format ("user_friendly" or "detailed")
        BDARMA_QUIET: Set to "true" to disable all log output

    Example:
        import os
        os.environ["BDARMA_LOG_LEVEL"] = "DEBUG"

        from bdarma import ModelSpec, CompositionalSeries, get_engine
"""

# logging is configured before any other bdarma import
from bdarma import logging_config

__version__ = "0.1.0"

from bdarma.core import (  # noqa: E402
    CompositionalSeries,
    EngineKind,
    ForecastResult,
    ModelSpec,
    forecast,
    get_engine,
)

__all__ = [
    "CompositionalSeries",
    "EngineKind",
    "ForecastResult",
    "ModelSpec",
    "forecast",
    "get_engine",
    "logging_config",
]
