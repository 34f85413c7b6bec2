"""``bdarma forecast``: simulate forecast paths from a saved fit.

Writes ``forecast.csv``. With ``--actuals`` it also writes the alr-scale
residuals and the FRMSE/FMAE table computed exactly as ``bdarma
evaluate`` would from the same two files.
"""

import argparse

import numpy as np

from bdarma.cli.options import check_seed, prepare_out
from bdarma.core.forecast import MA_SAMPLED, MA_ZERO, forecast
from bdarma.core.metrics import evaluate_forecast_frame
from bdarma.exceptions import UsageError
from bdarma.io.artifacts import (
    FORECAST_FILE,
    METRICS_FILE,
    RESIDUALS_FILE,
    load_fit,
    read_csv,
    read_series,
    write_csv,
)
from bdarma.io.manifest import RunManifest
from bdarma.utils import keyed_generator

NAME = "forecast"

# stream key of forecast draws under the master seed
FORECAST_KEY = 1


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(NAME, parents=[parent], help="Forecast from a saved fit")
    parser.add_argument("--fit", required=True, help="Directory written by 'bdarma fit'")
    parser.add_argument("--horizon", type=int, required=True, help="Steps ahead H")
    parser.add_argument("--actuals", default=None, help="Series CSV covering the forecast window")
    parser.add_argument("--ma-innovations", choices=[MA_SAMPLED, MA_ZERO], default=MA_SAMPLED)
    parser.add_argument(
        "--paths", type=int, default=None, help="Trajectories for point-estimate fits"
    )
    parser.add_argument(
        "--level",
        type=float,
        action="append",
        default=None,
        help="Interval level (repeatable, default 0.95)",
    )
    parser.set_defaults(handler=run)


def actuals_window(path, series, horizon: int) -> np.ndarray:
    """Rows of the actuals CSV at t = T+1..T+H of the training series.

    Raises:
        UsageError: The actuals do not cover the window; names the first missing t
    """
    actuals = read_series(path, zero_policy="epsilon")
    if actuals.n_components != series.n_components:
        raise UsageError(
            f"actuals have {actuals.n_components} components, the fit {series.n_components}"
        )
    offset = (actuals.epoch - series.epoch).days  # t of the first actual row is offset + 1
    first, last = series.n_times + 1, series.n_times + horizon
    start, stop = first - offset - 1, last - offset
    if start < 0:
        raise UsageError(f"actuals start after t={first}", t=first)
    if stop > actuals.n_times:
        missing = max(first, offset + actuals.n_times + 1)
        raise UsageError(f"actuals end before t={missing}", t=missing)
    return actuals.observations[start:stop]


def run(args) -> int:
    check_seed(args.seed)
    if args.horizon < 1:
        raise UsageError(f"--horizon must be at least 1, got {args.horizon}")
    levels = args.level or [0.95]
    if any(not 0 < level < 1 for level in levels):
        raise UsageError(f"interval levels must lie in (0, 1), got {levels}")
    loaded = load_fit(args.fit)
    seed = 0 if args.seed is None else args.seed
    out = prepare_out(args.out)
    inputs = {"fit": args.fit}
    if args.actuals:
        inputs["actuals"] = args.actuals
    settings = f"{args.horizon}|{args.ma_innovations}|{args.paths}".encode()
    manifest = RunManifest.start(NAME, seed, inputs, settings)

    result = forecast(
        loaded.spec,
        loaded.fit,
        loaded.series,
        args.horizon,
        keyed_generator(seed, FORECAST_KEY),
        ma_innovations=args.ma_innovations,
        n_paths=args.paths,
    )
    frame = result.to_frame(levels)
    written = [write_csv(frame, out / FORECAST_FILE)]

    if args.actuals:
        window = actuals_window(args.actuals, loaded.series, args.horizon)
        written.append(write_csv(result.residuals_frame(window), out / RESIDUALS_FILE))
        actuals = read_csv(args.actuals, dtype={"date": str})
        metrics = evaluate_forecast_frame(read_csv(out / FORECAST_FILE), actuals)
        metrics_frame = metrics.rename_axis("component").reset_index()
        written.append(write_csv(metrics_frame, out / METRICS_FILE))

    manifest.settings = {
        "horizon": args.horizon,
        "ma_innovations": args.ma_innovations,
        "levels": levels,
    }
    manifest.write(out, written)
    return 0
