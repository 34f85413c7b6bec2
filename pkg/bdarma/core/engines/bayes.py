"""Posterior sampling for B-DARMA models.

Chains run in parallel threads; chain k draws from the k-th child of the
master seed, so the output does not depend on the thread count.

Example:
    >>> from bdarma.core.engines.bayes import SamplerConfig, sample_posterior
    >>> draws = sample_posterior(spec, series, SamplerConfig(chains=4, seed=42))
    >>> draws.summary_frame().loc["A1[1,1]", "mean"]
"""

import logging
import time
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from bdarma.core.engines.base import BaseEngine, FitResult
from bdarma.core.engines.diagnostics import (
    convergence_warnings,
    effective_sample_size,
    per_coordinate,
    split_rhat,
    summarize,
)
from bdarma.core.engines.nuts import ChainResult, run_chain
from bdarma.core.model.posterior import LogPosterior
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec
from bdarma.exceptions import UsageError
from bdarma.utils import parallel_map, spawn_generators

logger = logging.getLogger(__name__)


class SamplerConfig(BaseModel):
    """NUTS settings. Defaults: 4 chains of 1000 warm-up and 1000 sampling iterations."""

    model_config = ConfigDict(frozen=True)

    chains: int = Field(4, ge=1)
    warmup: int = Field(1000, ge=0)
    samples: int = Field(1000, ge=1)
    target_accept: float = Field(0.8, gt=0, lt=1)
    max_tree_depth: int = Field(10, ge=1)
    init_range: float = Field(
        1.0, gt=0, description="Inits drawn uniformly in [-r, r] on the sampling space"
    )
    seed: int = Field(0, ge=0)


class SamplerDiagnostics(BaseModel):
    """Per-run sampler health."""

    divergences: List[int] = Field(
        default_factory=list, description="Post-warm-up divergences per chain"
    )
    step_sizes: List[float] = Field(default_factory=list)
    mean_accept: List[float] = Field(default_factory=list)
    mean_tree_depth: List[float] = Field(default_factory=list)
    max_rhat: float = 1.0
    min_ess: float = 0.0
    warnings: List[str] = Field(default_factory=list)

    @property
    def total_divergences(self) -> int:
        return int(sum(self.divergences))


class PosteriorDraws(FitResult):
    """Posterior draws over the full parameter layout.

    Attributes:
        draws: Array (chains * samples, C); masked slots are exactly zero
        chain: Chain id of every draw
        iteration: Post-warm-up iteration of every draw
        log_density: Unnormalized log posterior of every draw
        local_scales: Array (S*, G) of horseshoe lambdas (G may be 0)
        local_scale_names: Labels of the lambdas
        rhat: Per-coordinate R-hat
        ess: Per-coordinate bulk ESS
    """

    engine: str = "bayes"
    draws: np.ndarray
    chain: np.ndarray
    iteration: np.ndarray
    log_density: np.ndarray
    local_scales: np.ndarray
    local_scale_names: List[str] = Field(default_factory=list)
    rhat: np.ndarray
    ess: np.ndarray
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    diagnostics: SamplerDiagnostics = Field(default_factory=SamplerDiagnostics)

    @property
    def n_draws(self) -> int:
        return int(self.draws.shape[0])

    def point_estimate(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def intervals(self, level: float = 0.95) -> np.ndarray:
        tail = (1.0 - level) / 2.0
        return np.quantile(self.draws, [tail, 1.0 - tail], axis=0, method="linear").T

    def parameter_draws(self, n_paths: Optional[int] = None) -> np.ndarray:
        return self.draws

    def summary_frame(self, levels=(0.95,)) -> pd.DataFrame:
        frame = summarize(self.draws, self.names, levels)
        frame["rhat"] = self.rhat
        frame["ess"] = self.ess
        return frame

    def summary(self) -> Dict[str, Any]:
        return {
            "engine": self.engine,
            "draws": self.n_draws,
            "chains": int(np.unique(self.chain).size),
            "divergences": self.diagnostics.total_divergences,
            "max_rhat": self.diagnostics.max_rhat,
            "min_ess": self.diagnostics.min_ess,
            "warnings": list(self.diagnostics.warnings),
        }


def sample_posterior(
    spec: ModelSpec,
    series: CompositionalSeries,
    config: Optional[SamplerConfig] = None,
    threads: Optional[int] = None,
) -> PosteriorDraws:
    """Draw from the posterior of ``spec`` given ``series``.

    Args:
        spec: Model specification
        series: Training data (T > max(P, Q))
        config: Sampler settings
        threads: Worker threads for the chains (``None`` uses all cores)

    Returns:
        PosteriorDraws with diagnostics; convergence problems are logged as
        warnings and recorded in ``diagnostics.warnings``

    Raises:
        UsageError: The series leaves no step to condition on
    """
    config = config or SamplerConfig()
    if series.n_times <= spec.max_lag:
        raise UsageError(
            f"series of length {series.n_times} is too short for max(P, Q) = {spec.max_lag}",
            t=spec.max_lag + 1,
        )
    target = LogPosterior(spec, series)
    layout = target.layout
    logger.info(
        f"Sampling {config.chains} chains x {config.samples} draws "
        f"({target.dim} unconstrained parameters, T={series.n_times})"
    )
    started = time.perf_counter()

    rngs = spawn_generators(config.seed, config.chains)

    def one_chain(k: int) -> ChainResult:
        return run_chain(
            target.value_and_grad,
            target.dim,
            rngs[k],
            n_warmup=config.warmup,
            n_samples=config.samples,
            target_accept=config.target_accept,
            max_tree_depth=config.max_tree_depth,
            init_range=config.init_range,
            chain_id=k,
        )

    results = parallel_map(one_chain, range(config.chains), threads)

    unconstrained = np.concatenate([r.samples for r in results])
    theta, lam = target.constrain(unconstrained)
    chain = np.repeat(np.arange(config.chains), config.samples)
    iteration = np.tile(np.arange(config.samples), config.chains)

    rhat_values = per_coordinate(theta, chain, split_rhat)
    ess_values = per_coordinate(theta, chain, effective_sample_size)
    divergences = [int(r.divergent.sum()) for r in results]
    free = layout.free_index
    found = convergence_warnings(
        rhat_values[free], layout.free_names, sum(divergences), unconstrained.shape[0]
    )
    diagnostics = SamplerDiagnostics(
        divergences=divergences,
        step_sizes=[r.step_size for r in results],
        mean_accept=[float(r.accept_stat.mean()) for r in results],
        mean_tree_depth=[float(r.tree_depth.mean()) for r in results],
        max_rhat=float(np.max(rhat_values[free])) if free.size else 1.0,
        min_ess=float(np.min(ess_values[free])) if free.size else 0.0,
        warnings=found,
    )
    elapsed = time.perf_counter() - started
    logger.info(
        f"Sampling finished in {elapsed:.1f}s: max R-hat {diagnostics.max_rhat:.3f}, "
        f"min ESS {diagnostics.min_ess:.0f}, {diagnostics.total_divergences} divergences"
    )
    return PosteriorDraws(
        spec=spec,
        names=layout.names,
        draws=theta,
        chain=chain,
        iteration=iteration,
        log_density=np.concatenate([r.log_density for r in results]),
        local_scales=lam,
        local_scale_names=target.local_scale_names,
        rhat=rhat_values,
        ess=ess_values,
        sampler=config,
        diagnostics=diagnostics,
        elapsed_seconds=elapsed,
    )


class BayesEngine(BaseEngine):
    """Fits by NUTS sampling of the posterior."""

    name = "bayes"

    def __init__(self, config: Optional[SamplerConfig] = None, threads: Optional[int] = None):
        self.config = config or SamplerConfig()
        self.threads = threads

    def fit(self, spec: ModelSpec, series: CompositionalSeries) -> PosteriorDraws:
        return sample_posterior(spec, series, self.config, self.threads)

    def describe(self) -> Dict[str, Any]:
        return {"engine": self.name, **self.config.model_dump()}
