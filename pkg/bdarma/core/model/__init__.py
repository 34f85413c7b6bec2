"""The DARMA model: specification, parameter layout, likelihood, priors and posterior."""

from .design import build_design, design_matrix, design_row, growth_rate_per_day
from .layout import ParamLayout, ParamVector
from .likelihood import (
    linear_predictor,
    linear_predictor_path,
    log_likelihood,
    log_likelihood_grad,
    pointwise_log_likelihood,
    scale_value,
)
from .posterior import LogPosterior, center_to_uncentered, log_posterior_and_grad
from .prior import log_prior
from .series import CompositionalSeries
from .spec import (
    BandedNormalPrior,
    CovariateSpec,
    DesignNormalPrior,
    FourierTerm,
    GammaInterceptPrior,
    HorseshoePrior,
    MaskKind,
    ModelSpec,
    NormalPrior,
    Parameterization,
    PriorConfig,
    TrendKind,
    count_free,
    free_parameter_difference,
    mask_matrix,
)

__all__ = [
    "build_design",
    "design_matrix",
    "design_row",
    "growth_rate_per_day",
    "ParamLayout",
    "ParamVector",
    "linear_predictor",
    "linear_predictor_path",
    "log_likelihood",
    "log_likelihood_grad",
    "pointwise_log_likelihood",
    "scale_value",
    "LogPosterior",
    "center_to_uncentered",
    "log_posterior_and_grad",
    "log_prior",
    "CompositionalSeries",
    "BandedNormalPrior",
    "CovariateSpec",
    "DesignNormalPrior",
    "FourierTerm",
    "GammaInterceptPrior",
    "HorseshoePrior",
    "MaskKind",
    "ModelSpec",
    "NormalPrior",
    "Parameterization",
    "PriorConfig",
    "TrendKind",
    "count_free",
    "free_parameter_difference",
    "mask_matrix",
]
