"""``bdarma evaluate``: FRMSE/FMAE of a saved forecast against actuals."""

import argparse

from bdarma.cli.options import prepare_out
from bdarma.core.metrics import evaluate_forecast_frame
from bdarma.io.artifacts import METRICS_FILE, read_csv, write_csv
from bdarma.io.manifest import RunManifest

NAME = "evaluate"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[parent], help="Score a forecast CSV against actuals"
    )
    parser.add_argument(
        "--forecast", required=True, help="forecast.csv written by 'bdarma forecast'"
    )
    parser.add_argument("--actuals", required=True, help="Series CSV with the realized shares")
    parser.set_defaults(handler=run)


def run(args) -> int:
    out = prepare_out(args.out)
    inputs = {"forecast": args.forecast, "actuals": args.actuals}
    manifest = RunManifest.start(NAME, args.seed or 0, inputs)
    actuals = read_csv(args.actuals, dtype={"date": str})
    metrics = evaluate_forecast_frame(read_csv(args.forecast), actuals)
    written = [write_csv(metrics.rename_axis("component").reset_index(), out / METRICS_FILE)]
    manifest.write(out, written)
    return 0
