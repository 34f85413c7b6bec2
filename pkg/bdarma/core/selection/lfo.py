"""Leave-future-out expected log predictive density.

For every split t in L..T-M the score is log p(y_{t+1..t+M} | y_{1..t}),
estimated as the log mean over posterior draws of the M-step likelihood.
The exact variant refits at every split. The PSIS variant fits once at L,
then reweights the draws by the likelihood of the observations added
since the last fit, and refits only when the Pareto shape of those
weights exceeds ``k_threshold``.

A refit at split t always samples with the seed derived from (seed, t),
so exact and approximate runs share their fits.

Example:
    >>> config = LfoConfig(min_history=365, k_threshold=0.7)
    >>> report = lfo_elpd_psis(spec, series, config, SamplerConfig(seed=1))
    >>> report.elpd, report.refit_times
"""

import logging
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from bdarma.core.engines.bayes import PosteriorDraws, SamplerConfig, sample_posterior
from bdarma.core.model.likelihood import DarmaLikelihood
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec
from bdarma.core.selection.psis import psis_smooth
from bdarma.exceptions import UsageError
from bdarma.utils import keyed_seed, parallel_map

logger = logging.getLogger(__name__)


class LfoConfig(BaseModel):
    """Leave-future-out settings."""

    model_config = ConfigDict(frozen=True)

    min_history: Optional[int] = Field(
        None, ge=1, description="First split L; defaults to min_history_fraction * T"
    )
    min_history_fraction: float = Field(0.5, gt=0, lt=1)
    steps_ahead: int = Field(1, ge=1, description="Steps M predicted jointly at every split")
    k_threshold: float = Field(
        0.7, ge=0, le=1, description="Refit when the Pareto k-hat exceeds this"
    )

    def resolve_min_history(self, n_times: int, max_lag: int) -> int:
        """Split L for a series of ``n_times`` steps.

        Raises:
            UsageError: L <= max(P, Q) or the series is shorter than L + M
        """
        history = self.min_history or max(max_lag + 1, int(self.min_history_fraction * n_times))
        if history < max_lag + 1:
            raise UsageError(
                f"min_history {history} must exceed max(P, Q) = {max_lag}", t=max_lag + 1
            )
        if n_times < history + self.steps_ahead:
            raise UsageError(
                f"series of length {n_times} is shorter than L + M = {history + self.steps_ahead}",
                t=history + self.steps_ahead,
            )
        return history


class LfoReport(BaseModel):
    """Pointwise LFO scores of one model.

    Attributes:
        times: Split points t (history length) in increasing order
        pointwise: log p(y_{t+1..t+M} | y_{1..t}) per split
        k_hat: Pareto shape per split (NaN where no weights were computed)
        refit_times: Splits at which the model was fitted
        unreliable: Splits whose fit reported convergence warnings
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: str = "model"
    method: str = "psis"
    steps_ahead: int = 1
    times: np.ndarray
    pointwise: np.ndarray
    k_hat: np.ndarray
    refit_times: List[int] = Field(default_factory=list)
    unreliable: List[int] = Field(default_factory=list)

    @property
    def elpd(self) -> float:
        return float(np.sum(self.pointwise))

    @property
    def se(self) -> float:
        n = self.pointwise.size
        return float(np.sqrt(n * np.var(self.pointwise))) if n > 1 else 0.0

    @property
    def n_refits(self) -> int:
        return len(self.refit_times)

    def to_frame(self) -> pd.DataFrame:
        refits = set(self.refit_times)
        return pd.DataFrame(
            {
                "t": self.times,
                "elpd": self.pointwise,
                "k_hat": self.k_hat,
                "refit": [int(t) in refits for t in self.times],
                "unreliable": [int(t) in set(self.unreliable) for t in self.times],
            }
        )

    def summary_line(self) -> str:
        return f"{self.model}: ELPD {self.elpd:.2f} (se {self.se:.2f}), {self.n_refits} refits"


def pointwise_matrix(spec: ModelSpec, draws: np.ndarray, series: CompositionalSeries) -> np.ndarray:
    """Per-draw, per-step log-likelihood on the full series, shape (S*, T).

    Step u only depends on y_{1..u}, so evaluating on the full series gives
    the same contributions as evaluating on any prefix that contains u.
    """
    likelihood = DarmaLikelihood(spec, series)
    return np.stack([likelihood.pointwise(theta) for theta in draws])


def _refit(
    spec: ModelSpec,
    series: CompositionalSeries,
    t: int,
    sampler: SamplerConfig,
    threads: Optional[int],
) -> PosteriorDraws:
    config = sampler.model_copy(update={"seed": keyed_seed(sampler.seed, t)})
    logger.info(f"LFO fit on y[1..{t}]")
    return sample_posterior(spec, series.truncate(t), config, threads)


def _log_predictive(ll: np.ndarray, t: int, steps: int) -> float:
    block = ll[:, t : t + steps].sum(axis=1)
    return float(logsumexp(block) - np.log(block.size))


def lfo_elpd_exact(
    spec: ModelSpec,
    series: CompositionalSeries,
    config: Optional[LfoConfig] = None,
    sampler_config: Optional[SamplerConfig] = None,
    threads: Optional[int] = 1,
    model: str = "model",
) -> LfoReport:
    """Leave-future-out ELPD with a refit at every split.

    Splits run in parallel on ``threads`` workers (chains inside each fit
    run serially), results collected in split order.
    """
    config = config or LfoConfig()
    sampler = sampler_config or SamplerConfig()
    series.check_spec(spec)
    history = config.resolve_min_history(series.n_times, spec.max_lag)
    splits = list(range(history, series.n_times - config.steps_ahead + 1))
    logger.info(f"Exact LFO for {model}: {len(splits)} splits from t={history}")

    def score(t: int):
        fit = _refit(spec, series, t, sampler, threads=1)
        ll = pointwise_matrix(spec, fit.draws, series)
        return _log_predictive(ll, t, config.steps_ahead), bool(fit.diagnostics.warnings)

    results = parallel_map(score, splits, threads)
    return LfoReport(
        model=model,
        method="exact",
        steps_ahead=config.steps_ahead,
        times=np.array(splits),
        pointwise=np.array([value for value, _ in results]),
        k_hat=np.full(len(splits), np.nan),
        refit_times=splits,
        unreliable=[t for t, (_, flagged) in zip(splits, results) if flagged],
    )


def lfo_elpd_psis(
    spec: ModelSpec,
    series: CompositionalSeries,
    config: Optional[LfoConfig] = None,
    sampler_config: Optional[SamplerConfig] = None,
    threads: Optional[int] = None,
    model: str = "model",
) -> LfoReport:
    """Leave-future-out ELPD approximated by Pareto-smoothed importance sampling.

    A refit happens at the first split and whenever ``k_threshold <= 0``
    or the k-hat of the accumulated weights exceeds ``k_threshold``.
    """
    config = config or LfoConfig()
    sampler = sampler_config or SamplerConfig()
    series.check_spec(spec)
    history = config.resolve_min_history(series.n_times, spec.max_lag)
    steps = config.steps_ahead
    splits = list(range(history, series.n_times - steps + 1))
    logger.info(f"PSIS-LFO for {model}: {len(splits)} splits from t={history}")

    pointwise = np.empty(len(splits))
    k_trace = np.full(len(splits), np.nan)
    refit_times: List[int] = []
    unreliable: List[int] = []
    ll = np.empty((0, 0))
    last_fit = history

    for i, t in enumerate(splits):
        refit = i == 0
        if not refit:
            log_ratio = ll[:, last_fit:t].sum(axis=1)
            log_weights, k = psis_smooth(log_ratio)
            k_trace[i] = k
            refit = config.k_threshold <= 0 or k > config.k_threshold
            if refit:
                logger.info(
                    f"Pareto k-hat {k:.3f} at t={t} exceeds {config.k_threshold}; refitting"
                )
        if refit:
            fit = _refit(spec, series, t, sampler, threads)
            ll = pointwise_matrix(spec, fit.draws, series)
            last_fit = t
            refit_times.append(t)
            if fit.diagnostics.warnings:
                unreliable.append(t)
            pointwise[i] = _log_predictive(ll, t, steps)
        else:
            block = ll[:, t : t + steps].sum(axis=1)
            pointwise[i] = float(logsumexp(log_weights + block))

    report = LfoReport(
        model=model,
        method="psis",
        steps_ahead=steps,
        times=np.array(splits),
        pointwise=pointwise,
        k_hat=k_trace,
        refit_times=refit_times,
        unreliable=unreliable,
    )
    logger.info(report.summary_line())
    return report


def compare_models(reports: Dict[str, LfoReport]) -> pd.DataFrame:
    """Rank models by ELPD.

    ``elpd_diff`` is best minus candidate (0 for the best model), so it is
    never negative; tables that print candidate minus best show the same
    values negated. ``diff_se`` comes from the pointwise differences when
    both reports cover the same splits, NaN otherwise.
    """
    if not reports:
        raise UsageError("no models to compare")
    ordered = sorted(reports.items(), key=lambda item: item[1].elpd, reverse=True)
    best_name, best = ordered[0]
    rows = []
    for rank, (name, report) in enumerate(ordered, start=1):
        if np.array_equal(report.times, best.times):
            diff = best.pointwise - report.pointwise
            diff_se = float(np.sqrt(diff.size * np.var(diff))) if diff.size > 1 else 0.0
        else:
            diff_se = float("nan")
        rows.append(
            {
                "model": name,
                "rank": rank,
                "elpd": report.elpd,
                "se": report.se,
                "elpd_diff": best.elpd - report.elpd,
                "diff_se": diff_se,
                "n_refits": report.n_refits,
                "n_unreliable": len(report.unreliable),
            }
        )
    logger.debug(f"Best model by LFO ELPD: {best_name}")
    return pd.DataFrame(rows).set_index("model")
