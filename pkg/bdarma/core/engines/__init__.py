"""Fitting engines: NUTS posterior sampling, DARMA maximum likelihood and the tVARMA baseline."""

from enum import Enum
from typing import Optional

from .base import BaseEngine, FitResult
from .bayes import BayesEngine, PosteriorDraws, SamplerConfig, sample_posterior
from .mle import DarmaMleEngine, MleResult, OptimizerConfig, fit_mle_darma
from .tvarma import TvarmaEngine, TvarmaResult, fit_tvarma


class EngineKind(str, Enum):
    BAYES = "bayes"
    MLE_DARMA = "mle-darma"
    TVARMA = "tvarma"


def get_engine(
    kind: "EngineKind | str",
    sampler: Optional[SamplerConfig] = None,
    optimizer: Optional[OptimizerConfig] = None,
    threads: Optional[int] = None,
) -> BaseEngine:
    """Build the engine named by ``kind`` from the matching settings block."""
    kind = EngineKind(kind)
    if kind is EngineKind.BAYES:
        return BayesEngine(sampler, threads)
    if kind is EngineKind.MLE_DARMA:
        return DarmaMleEngine(optimizer)
    return TvarmaEngine(optimizer)


__all__ = [
    "BaseEngine",
    "FitResult",
    "EngineKind",
    "get_engine",
    "BayesEngine",
    "PosteriorDraws",
    "SamplerConfig",
    "sample_posterior",
    "DarmaMleEngine",
    "MleResult",
    "OptimizerConfig",
    "fit_mle_darma",
    "TvarmaEngine",
    "TvarmaResult",
    "fit_tvarma",
]
