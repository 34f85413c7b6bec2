"""Model selection by leave-future-out ELPD with Pareto-smoothed importance sampling."""

from .lfo import (
    LfoConfig,
    LfoReport,
    compare_models,
    lfo_elpd_exact,
    lfo_elpd_psis,
    pointwise_matrix,
)
from .psis import fit_gpd_tail, gpd_quantile, psis_smooth

__all__ = [
    "LfoConfig",
    "LfoReport",
    "compare_models",
    "lfo_elpd_exact",
    "lfo_elpd_psis",
    "pointwise_matrix",
    "fit_gpd_tail",
    "gpd_quantile",
    "psis_smooth",
]
