"""``bdarma replicate-study``: run a simulation study or the synthetic benchmark.

Writes the forecast table (components as rows plus ``Total``, FRMSE and
FMAE per model), the long recovery table when the study records
recovery, and ``status.csv`` with failures, retry rates and timings.

Example:
    bdarma replicate-study --preset simulation_1 --out runs/study1 --threads 8
"""

import argparse
from typing import Tuple

from bdarma.cli.options import check_seed, prepare_out
from bdarma.core.study import PRESETS, StudyConfig, run_airbnb_style_benchmark, run_study
from bdarma.io.artifacts import write_csv
from bdarma.io.config import read_flat_config
from bdarma.io.manifest import RunManifest

NAME = "replicate-study"

BENCHMARK = "benchmark"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(NAME, parents=[parent], help="Run a replicated simulation study")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="Study config document")
    source.add_argument("--preset", choices=sorted(PRESETS), help="Built-in study")
    parser.add_argument(
        "--full-scale", action="store_true", help="Preset at full replicate/iteration counts"
    )
    parser.add_argument(
        "--replicates", type=int, default=None, help="Override the number of replicates"
    )
    parser.set_defaults(handler=run)


def _load(args) -> Tuple[StudyConfig, bytes]:
    if args.preset:
        return PRESETS[args.preset](args.full_scale), f"{args.preset}|{args.full_scale}".encode()
    return read_flat_config(args.config, StudyConfig)


def run(args) -> int:
    check_seed(args.seed)
    config, raw = _load(args)
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.replicates is not None:
        update["replicates"] = args.replicates
    if update:
        config = StudyConfig.model_validate({**config.model_dump(), **update})
    out = prepare_out(args.out)
    manifest = RunManifest.start(NAME, config.seed, {}, raw + config.model_dump_json().encode())

    if args.preset == BENCHMARK:
        report = run_airbnb_style_benchmark(config, args.threads)
    else:
        report = run_study(config, args.threads)

    written = [write_csv(report.forecast_table().reset_index(), out / report.forecast_table_name)]
    if report.recovery:
        written.append(write_csv(report.recovery_table(), out / report.recovery_table_name))
    written.append(write_csv(report.status_table().reset_index(), out / "status.csv"))

    manifest.settings = {
        "name": config.name,
        "replicates": config.replicates,
        "models": report.models,
        "regenerations": report.regenerations,
    }
    manifest.warnings = [
        f"{model}: {count} of {report.n_replicates} fits failed"
        for model, count in report.failures.items()
        if count
    ]
    manifest.write(out, written)
    return 0
