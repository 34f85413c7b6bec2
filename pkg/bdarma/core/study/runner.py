"""Replicated simulation studies.

Each replicate is generated, split into training and test windows, and
every configured model is fitted and used to forecast the test window.
Replicates run in parallel; every random stream is keyed by
(replicate, model) so the tables do not depend on the thread count.

Example:
    >>> from bdarma.core.study import run_study, simulation_study_1
    >>> report = run_study(simulation_study_1().model_copy(update={"replicates": 2}))
    >>> report.forecast_table()
"""

import logging
import time
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from bdarma.core.engines import EngineKind, get_engine
from bdarma.core.forecast import forecast
from bdarma.core.metrics import MetricReport, forecast_metrics, recovery_metrics
from bdarma.core.model.layout import ParamLayout
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.study.config import ModelEntry, StudyConfig
from bdarma.core.study.dgm import dgm_spec, resolve_truth, simulate_replicate
from bdarma.exceptions import BdarmaError, FitFailedError
from bdarma.utils import keyed_generator, keyed_seed, parallel_map

logger = logging.getLogger(__name__)

FORECAST_STREAM = 1


class ModelOutcome(BaseModel):
    """What one model produced on one replicate."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: str
    failed: bool = False
    error: str = ""
    attempts: int = 1
    estimate: Optional[np.ndarray] = None
    intervals: Optional[np.ndarray] = None
    point: Optional[np.ndarray] = None
    seconds: float = 0.0


class ReplicateOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    index: int
    regenerations: int
    actuals: np.ndarray
    models: List[ModelOutcome]


class StudyReport(BaseModel):
    """Aggregated recovery and forecast tables of a study.

    Attributes:
        recovery: Per-model bias/RMSE/CIL/coverage (empty for the benchmark)
        forecast: Per-model FRMSE/FMAE per component
        failures: Replicates on which the model could not be fitted
        retried: Fits that needed more than one optimizer attempt
        regenerations: DGM regenerations over all replicates
        seconds: Mean fitting wall-clock per model (reported only)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    n_replicates: int
    models: List[str]
    recovery: Dict[str, MetricReport] = Field(default_factory=dict)
    forecast: Dict[str, MetricReport] = Field(default_factory=dict)
    failures: Dict[str, int] = Field(default_factory=dict)
    retried: Dict[str, int] = Field(default_factory=dict)
    regenerations: int = 0
    seconds: Dict[str, float] = Field(default_factory=dict)
    recovery_table_name: str = "supp_table1_recovery.csv"
    forecast_table_name: str = "table1_frmse.csv"

    def retry_rate(self, model: str) -> float:
        """Share of fits that needed more than one optimizer attempt."""
        if not self.n_replicates:
            return float("nan")
        return self.retried.get(model, 0) / self.n_replicates

    def forecast_table(self) -> pd.DataFrame:
        """Components as rows (plus Total), ``<model> FRMSE`` / ``<model> FMAE`` columns."""
        columns = {}
        for model in self.models:
            if model not in self.forecast:
                continue
            frame = self.forecast[model].forecast_frame()
            columns[f"{model} FRMSE"] = frame["frmse"]
            columns[f"{model} FMAE"] = frame["fmae"]
        return pd.DataFrame(columns)

    def recovery_table(self) -> pd.DataFrame:
        """Long table: model, parameter, bias, rmse, cil, coverage."""
        frames = []
        for model in self.models:
            if model in self.recovery:
                frame = self.recovery[model].recovery_frame().reset_index()
                frame.insert(0, "model", model)
                frames.append(frame)
        if not frames:
            return pd.DataFrame(columns=["model", "parameter", "bias", "rmse", "cil", "coverage"])
        return pd.concat(frames, ignore_index=True)

    def status_table(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "failures": [self.failures.get(m, 0) for m in self.models],
                "retried": [self.retried.get(m, 0) for m in self.models],
                "retry_rate": [self.retry_rate(m) for m in self.models],
                "mean_seconds": [self.seconds.get(m, float("nan")) for m in self.models],
            },
            index=pd.Index(self.models, name="model"),
        )


def _fit_one(
    config: StudyConfig,
    entry: ModelEntry,
    position: int,
    replicate: int,
    train: CompositionalSeries,
    horizon: int,
) -> ModelOutcome:
    seed = keyed_seed(config.seed, replicate, position)
    sampler = config.sampler.model_copy(update={"seed": seed})
    optimizer = config.optimizer.model_copy(update={"seed": seed})
    engine = get_engine(entry.engine, sampler=sampler, optimizer=optimizer, threads=1)
    started = time.perf_counter()
    try:
        fit = engine.fit(entry.spec, train)
        prediction = forecast(
            entry.spec,
            fit,
            train,
            horizon,
            keyed_generator(config.seed, replicate, position, FORECAST_STREAM),
            keep_paths=False,
        )
    except FitFailedError as exc:
        logger.error(f"{entry.name} failed on replicate {replicate}: {exc}", exc_info=True)
        return ModelOutcome(
            model=entry.name,
            failed=True,
            error=",".join(exc.reasons) or str(exc),
            attempts=max(1, len(exc.reasons)),
            seconds=time.perf_counter() - started,
        )
    except BdarmaError as exc:
        logger.error(f"{entry.name} failed on replicate {replicate}: {exc}", exc_info=True)
        elapsed = time.perf_counter() - started
        return ModelOutcome(model=entry.name, failed=True, error=str(exc), seconds=elapsed)
    return ModelOutcome(
        model=entry.name,
        attempts=int(getattr(fit, "attempts", 1)),
        estimate=fit.point_estimate(),
        intervals=fit.intervals(config.interval_level),
        point=prediction.point_forecast(),
        seconds=time.perf_counter() - started,
    )


def run_replicate(config: StudyConfig, replicate: int) -> ReplicateOutcome:
    """Generate replicate ``replicate`` and fit every model to it."""
    series, regenerations = simulate_replicate(config, replicate)
    train = series.truncate(config.t_train)
    actuals = np.asarray(series.observations[config.t_train :])
    outcomes = [
        _fit_one(config, entry, position, replicate, train, config.t_test)
        for position, entry in enumerate(config.models)
    ]
    logger.info(f"Replicate {replicate + 1}/{config.replicates} done")
    return ReplicateOutcome(
        index=replicate, regenerations=regenerations, actuals=actuals, models=outcomes
    )


def _aggregate(config: StudyConfig, outcomes: List[ReplicateOutcome]) -> StudyReport:
    truth_spec = dgm_spec(config)
    truth = resolve_truth(config).by_name(truth_spec) if config.record_recovery else {}
    n_components = truth_spec.n_components
    components = [f"y{j}" for j in range(1, n_components + 1)]
    report = StudyReport(
        name=config.name,
        n_replicates=len(outcomes),
        models=[entry.name for entry in config.models],
        regenerations=int(sum(o.regenerations for o in outcomes)),
        recovery_table_name=config.recovery_table,
        forecast_table_name=config.forecast_table,
    )

    for position, entry in enumerate(config.models):
        runs = [o.models[position] for o in outcomes]
        fitted = [(o, run) for o, run in zip(outcomes, runs) if not run.failed]
        report.failures[entry.name] = len(runs) - len(fitted)
        report.retried[entry.name] = sum(run.attempts > 1 for run in runs)
        report.seconds[entry.name] = float(np.mean([run.seconds for run in runs]))
        if not fitted:
            logger.warning(f"{entry.name} failed on every replicate")
            continue

        report.forecast[entry.name] = forecast_metrics(
            np.stack([o.actuals for o, _ in fitted]),
            np.stack([run.point for _, run in fitted]),
            components=components,
        )

        if truth:
            layout = ParamLayout(entry.fitted_spec)
            coords = [c for c in layout.free_index if layout.names[c] in truth]
            if coords:
                report.recovery[entry.name] = recovery_metrics(
                    np.stack([run.estimate[coords] for _, run in fitted]),
                    np.stack([run.intervals[coords] for _, run in fitted]),
                    np.array([truth[layout.names[c]] for c in coords]),
                    parameters=[layout.names[c] for c in coords],
                )
    return report


def run_study(config: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    """Run every replicate of ``config`` and aggregate the tables.

    Model failures are logged and counted; the replicate is kept for the
    other models.
    """
    started = time.perf_counter()
    logger.info(
        f"Study {config.name}: {config.replicates} replicates, "
        f"{len(config.models)} models, T={config.t_total} ({config.t_train}/{config.t_test})"
    )
    outcomes = parallel_map(lambda r: run_replicate(config, r), range(config.replicates), threads)
    report = _aggregate(config, outcomes)
    for model in report.models:
        if report.failures.get(model):
            failed = report.failures[model]
            logger.warning(f"{model}: {failed} of {report.n_replicates} fits failed")
    logger.info(f"Study {config.name} finished in {time.perf_counter() - started:.1f}s")
    return report


def run_airbnb_style_benchmark(config: StudyConfig, threads: Optional[int] = None) -> StudyReport:
    """Many-component daily benchmark: forecast tables only.

    The truth comes from ``benchmark_truth`` unless the config provides one.
    """
    config = config.model_copy(update={"record_recovery": False})
    mle_models = [e.name for e in config.models if e.engine is EngineKind.MLE_DARMA]
    report = run_study(config, threads)
    for model in mle_models:
        logger.info(f"{model} retry rate: {report.retry_rate(model):.2%}")
    return report
