"""CSV and JSON artifacts written and read by the command line.

Every float goes out with 17 significant digits, so reading a file back
gives the exact arrays that were written. Layouts:

- series: ``date, component_1..component_J`` (ISO dates, consecutive days)
- draws: ``chain, iter, lp`` then one column per layout name, then the
  horseshoe local scales
- estimates: ``parameter, estimate, se``; covariance: square table keyed
  by ``parameter``
- forecast: ``t, date, component, mean, median, q2.5, q97.5``

A fit directory holds the model document, the training series, a
``fit.json`` metadata record and the engine's tables; ``load_fit`` turns
it back into the fit object the engine returned.
"""

import json
import logging
from datetime import date, timedelta
from pathlib import Path
from typing import List, NamedTuple, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from bdarma.core.engines import (
    EngineKind,
    FitResult,
    MleResult,
    PosteriorDraws,
    SamplerConfig,
    TvarmaResult,
)
from bdarma.core.engines.bayes import SamplerDiagnostics
from bdarma.core.engines.diagnostics import effective_sample_size, per_coordinate, split_rhat
from bdarma.core.engines.tvarma import cholesky_from_params
from bdarma.core.model.layout import ParamLayout
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec
from bdarma.exceptions import DataError, UsageError
from bdarma.io.config import dump_flat_config, read_flat_config
from bdarma.utils import FLOAT_FORMAT

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SERIES_FILE = "series.csv"
SPEC_FILE = "model.cfg"
FIT_META_FILE = "fit.json"
DRAWS_FILE = "draws.csv"
SUMMARY_FILE = "summary.csv"
ESTIMATES_FILE = "estimates.csv"
COVARIANCE_FILE = "covariance.csv"
CHOLESKY_FILE = "cholesky.csv"
SIGMA_FILE = "sigma.csv"
FORECAST_FILE = "forecast.csv"
RESIDUALS_FILE = "residuals.csv"
METRICS_FILE = "metrics.csv"

DRAW_COLUMNS = ["chain", "iter", "lp"]


# ---------------------------------------------------------------------------
# Plain tables
# ---------------------------------------------------------------------------


def write_csv(frame: pd.DataFrame, path: PathLike, index: bool = False) -> Path:
    """Write a table with round-trip float precision and Unix line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {path} ({len(frame)} rows)")
    return path


def read_csv(path: PathLike, **kwargs) -> pd.DataFrame:
    """Read a table written by ``write_csv``.

    Raises:
        DataError: The file is missing or not a parsable CSV
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip", **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------


def component_columns(n_components: int) -> List[str]:
    return [f"component_{j}" for j in range(1, n_components + 1)]


def series_to_frame(series: CompositionalSeries) -> pd.DataFrame:
    frame = pd.DataFrame(series.observations, columns=component_columns(series.n_components))
    frame.insert(0, "date", series.dates())
    return frame


def _parse_dates(values: pd.Series) -> List[date]:
    parsed: List[date] = []
    for row, value in enumerate(values, start=1):
        try:
            parsed.append(date.fromisoformat(str(value)))
        except ValueError as exc:
            raise DataError(f"date {value!r} is not ISO-8601 (YYYY-MM-DD)", row=row) from exc
    for row in range(1, len(parsed)):
        if parsed[row] - parsed[row - 1] != timedelta(days=1):
            raise DataError(
                f"dates must be consecutive days ({parsed[row - 1]} is followed by {parsed[row]})",
                row=row + 1,
            )
    return parsed


def series_from_frame(
    frame: pd.DataFrame,
    zero_policy: str = "reject",
    epsilon: float = 1e-6,
    trend_scale: Optional[float] = None,
) -> CompositionalSeries:
    """Build a series from a ``date, component_1..component_J`` table.

    Raises:
        DataError: Missing columns, bad dates, gaps, non-numeric or
            non-positive shares (under the reject policy), rows off the simplex
    """
    if "date" not in frame.columns:
        raise DataError("series table has no 'date' column")
    present = [c for c in frame.columns if str(c).startswith("component_")]
    if len(present) < 2:
        raise DataError("series table needs at least two component_<j> columns")
    expected = component_columns(len(present))
    if present != expected:
        raise DataError(f"component columns must be {expected[0]}..{expected[-1]}, got {present}")
    if frame.empty:
        raise DataError("series table has no rows")
    dates = _parse_dates(frame["date"])
    values = frame[expected].apply(pd.to_numeric, errors="coerce")
    bad = np.argwhere(values.isna().to_numpy())
    if bad.size:
        raise DataError(f"{expected[bad[0][1]]} is not a number", row=int(bad[0][0]) + 1)
    return CompositionalSeries.from_array(
        values.to_numpy(dtype=float),
        trend_scale=trend_scale,
        epoch=dates[0],
        zero_policy=zero_policy,
        epsilon=epsilon,
    )


def write_series(series: CompositionalSeries, path: PathLike) -> Path:
    return write_csv(series_to_frame(series), path)


def read_series(
    path: PathLike,
    zero_policy: str = "reject",
    epsilon: float = 1e-6,
    trend_scale: Optional[float] = None,
) -> CompositionalSeries:
    frame = read_csv(path, dtype={"date": str})
    logger.info(f"Read {len(frame)} rows from {path}")
    return series_from_frame(
        frame, zero_policy=zero_policy, epsilon=epsilon, trend_scale=trend_scale
    )


# ---------------------------------------------------------------------------
# Posterior draws
# ---------------------------------------------------------------------------


def draws_to_frame(draws: PosteriorDraws) -> pd.DataFrame:
    frame = pd.DataFrame(draws.draws, columns=draws.names)
    for k, name in enumerate(draws.local_scale_names):
        frame[name] = draws.local_scales[:, k]
    frame.insert(0, "lp", draws.log_density)
    frame.insert(0, "iter", draws.iteration)
    frame.insert(0, "chain", draws.chain)
    return frame


def draws_from_frame(
    frame: pd.DataFrame,
    spec: ModelSpec,
    sampler: Optional[SamplerConfig] = None,
    diagnostics: Optional[SamplerDiagnostics] = None,
) -> PosteriorDraws:
    """Rebuild ``PosteriorDraws`` from a draws table; R-hat and ESS are recomputed.

    Raises:
        DataError: Missing layout columns or non-zero masked entries
    """
    layout = ParamLayout(spec)
    missing = [c for c in DRAW_COLUMNS + layout.names if c not in frame.columns]
    if missing:
        raise DataError(f"draws table lacks columns {missing[:5]}")
    scale_names = [c for c in frame.columns if c not in DRAW_COLUMNS and c not in set(layout.names)]
    theta = frame[layout.names].to_numpy(dtype=float)
    try:
        layout.check_masked_zero(theta)
    except UsageError as exc:
        raise DataError(str(exc)) from exc
    chain = frame["chain"].to_numpy(dtype=int)
    return PosteriorDraws(
        spec=spec,
        names=layout.names,
        draws=theta,
        chain=chain,
        iteration=frame["iter"].to_numpy(dtype=int),
        log_density=frame["lp"].to_numpy(dtype=float),
        local_scales=frame[scale_names].to_numpy(dtype=float).reshape(len(frame), len(scale_names)),
        local_scale_names=scale_names,
        rhat=per_coordinate(theta, chain, split_rhat),
        ess=per_coordinate(theta, chain, effective_sample_size),
        sampler=sampler or SamplerConfig(),
        diagnostics=diagnostics or SamplerDiagnostics(),
    )


# ---------------------------------------------------------------------------
# Point estimates
# ---------------------------------------------------------------------------


def mle_to_frame(result: MleResult) -> pd.DataFrame:
    return pd.DataFrame(
        {"parameter": result.names, "estimate": result.estimate, "se": result.standard_errors}
    )


def covariance_to_frame(matrix: np.ndarray, names: List[str]) -> pd.DataFrame:
    frame = pd.DataFrame(matrix, columns=names)
    frame.insert(0, "parameter", names)
    return frame


def _square(frame: pd.DataFrame, names: List[str], what: str) -> np.ndarray:
    if list(frame["parameter"]) != names or [c for c in frame.columns if c != "parameter"] != names:
        raise DataError(f"{what} table does not match the parameter layout")
    return frame[names].to_numpy(dtype=float)


def sigma_to_frame(result: TvarmaResult) -> pd.DataFrame:
    """Innovation standard deviations and correlations with delta-method SEs."""
    return pd.DataFrame(
        {
            "parameter": result.sigma_names,
            "estimate": result.sigma_estimates(),
            "se": result.sigma_standard_errors(),
        }
    )


def cholesky_names(dim: int) -> List[str]:
    rows, cols = np.tril_indices(dim)
    return [f"chol[{r + 1},{c + 1}]" for r, c in zip(rows, cols)]


class FitMetadata(BaseModel):
    """Engine outcome stored next to the tables as ``fit.json``."""

    engine: EngineKind
    n_times: int
    trend_scale: float
    epoch: date
    sampler: Optional[SamplerConfig] = None
    diagnostics: Optional[SamplerDiagnostics] = None
    converged: bool = True
    attempts: int = 1
    reasons: List[str] = Field(default_factory=list)
    log_likelihood: Optional[float] = None
    n_iterations: int = 0
    n_paths: int = 1000
    degenerate: bool = False


def mle_from_frame(
    estimates: pd.DataFrame,
    covariance: pd.DataFrame,
    spec: ModelSpec,
    meta: FitMetadata,
    cholesky: Optional[pd.DataFrame] = None,
) -> MleResult:
    """Rebuild an ``MleResult`` (or ``TvarmaResult`` when ``cholesky`` is given)."""
    layout = ParamLayout(spec)
    if list(estimates.get("parameter", [])) != layout.names:
        raise DataError("estimates table does not match the parameter layout")
    fields = dict(
        spec=spec,
        names=layout.names,
        estimate=estimates["estimate"].to_numpy(dtype=float),
        covariance=_square(covariance, layout.names, "covariance"),
        converged=meta.converged,
        attempts=meta.attempts,
        reasons=meta.reasons,
        log_likelihood=float("nan") if meta.log_likelihood is None else meta.log_likelihood,
        n_iterations=meta.n_iterations,
        n_paths=meta.n_paths,
    )
    if cholesky is None:
        return MleResult(**fields)
    names = cholesky_names(layout.dim)
    params = cholesky["estimate"].to_numpy(dtype=float)
    lower = cholesky_from_params(params, layout.dim)
    return TvarmaResult(
        **fields,
        sigma=lower @ lower.T,
        cholesky_params=params,
        cholesky_covariance=_square(cholesky.drop(columns="estimate"), names, "cholesky"),
        degenerate=meta.degenerate,
    )


# ---------------------------------------------------------------------------
# Fit directories
# ---------------------------------------------------------------------------


class LoadedFit(NamedTuple):
    spec: ModelSpec
    fit: FitResult
    series: CompositionalSeries
    meta: FitMetadata


def _metadata(fit: FitResult, series: CompositionalSeries) -> FitMetadata:
    meta = FitMetadata(
        engine=EngineKind(fit.engine),
        n_times=series.n_times,
        trend_scale=series.trend_scale,
        epoch=series.epoch,
    )
    if isinstance(fit, PosteriorDraws):
        return meta.model_copy(update={"sampler": fit.sampler, "diagnostics": fit.diagnostics})
    if isinstance(fit, MleResult):
        ll = fit.log_likelihood
        meta = meta.model_copy(
            update={
                "converged": fit.converged,
                "attempts": fit.attempts,
                "reasons": list(fit.reasons),
                "log_likelihood": float(ll) if np.isfinite(ll) else None,
                "n_iterations": fit.n_iterations,
                "n_paths": fit.n_paths,
            }
        )
    if isinstance(fit, TvarmaResult):
        meta = meta.model_copy(update={"degenerate": fit.degenerate})
    return meta


def save_fit(fit_dir: PathLike, fit: FitResult, series: CompositionalSeries) -> List[Path]:
    """Persist a fit and its training series; returns the files written."""
    fit_dir = Path(fit_dir)
    fit_dir.mkdir(parents=True, exist_ok=True)
    written = [write_series(series, fit_dir / SERIES_FILE)]

    spec_path = fit_dir / SPEC_FILE
    spec_path.write_text(dump_flat_config(fit.spec), encoding="utf-8")
    meta_path = fit_dir / FIT_META_FILE
    meta_path.write_text(_metadata(fit, series).model_dump_json(indent=2) + "\n", encoding="utf-8")
    written += [spec_path, meta_path]

    if isinstance(fit, PosteriorDraws):
        written.append(write_csv(draws_to_frame(fit), fit_dir / DRAWS_FILE))
        summary = fit.summary_frame().rename_axis("parameter").reset_index()
        written.append(write_csv(summary, fit_dir / SUMMARY_FILE))
    elif isinstance(fit, MleResult):
        written.append(write_csv(mle_to_frame(fit), fit_dir / ESTIMATES_FILE))
        covariance = covariance_to_frame(fit.covariance, fit.names)
        written.append(write_csv(covariance, fit_dir / COVARIANCE_FILE))
        if isinstance(fit, TvarmaResult):
            names = cholesky_names(fit.sigma.shape[0])
            chol = covariance_to_frame(fit.cholesky_covariance, names)
            chol.insert(1, "estimate", fit.cholesky_params)
            written.append(write_csv(chol, fit_dir / CHOLESKY_FILE))
            written.append(write_csv(sigma_to_frame(fit), fit_dir / SIGMA_FILE))
    else:
        raise UsageError(f"cannot persist a fit of type {type(fit).__name__}")
    logger.info(f"Saved {fit.engine} fit to {fit_dir}")
    return written


def load_fit(fit_dir: PathLike) -> LoadedFit:
    """Read a directory written by ``save_fit``.

    Raises:
        DataError: A file is missing or does not match the saved model
        ConfigError: The saved model document is invalid
    """
    fit_dir = Path(fit_dir)
    if not fit_dir.is_dir():
        raise DataError(f"fit directory not found: {fit_dir}")
    spec, _ = read_flat_config(fit_dir / SPEC_FILE, ModelSpec)
    try:
        raw_meta = (fit_dir / FIT_META_FILE).read_text(encoding="utf-8")
        meta = FitMetadata.model_validate(json.loads(raw_meta))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {fit_dir / FIT_META_FILE}: {exc}") from exc
    series = read_series(fit_dir / SERIES_FILE, trend_scale=meta.trend_scale)
    if series.n_times != meta.n_times or series.epoch != meta.epoch:
        raise DataError(f"{SERIES_FILE} does not match {FIT_META_FILE}")

    if meta.engine is EngineKind.BAYES:
        draws = read_csv(fit_dir / DRAWS_FILE)
        fit: FitResult = draws_from_frame(draws, spec, meta.sampler, meta.diagnostics)
    else:
        cholesky = read_csv(fit_dir / CHOLESKY_FILE) if meta.engine is EngineKind.TVARMA else None
        fit = mle_from_frame(
            read_csv(fit_dir / ESTIMATES_FILE),
            read_csv(fit_dir / COVARIANCE_FILE),
            spec,
            meta,
            cholesky,
        )
    logger.info(f"Loaded {meta.engine.value} fit from {fit_dir}")
    return LoadedFit(spec=spec, fit=fit, series=series, meta=meta)

