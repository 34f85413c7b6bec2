"""``bdarma fit``: fit one model to a series and persist the fit.

Sampler warnings (divergences, R-hat) are printed as a warning block and
the fit is still written; the exit code stays 0. An optimizer that fails
on every restart exits with the numerical-failure code.

Example:
    bdarma fit --data train.csv --config model.cfg --engine bayes --mask diagonal --out runs/fit
"""

import argparse

from bdarma.cli.options import add_mask, add_zero_policy, check_seed, prepare_out, report_warnings
from bdarma.core.engines import EngineKind, PosteriorDraws, get_engine
from bdarma.core.model.spec import MaskKind
from bdarma.io.artifacts import read_series, save_fit
from bdarma.io.config import FitConfig, read_flat_config
from bdarma.io.manifest import RunManifest

NAME = "fit"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(NAME, parents=[parent], help="Fit a model to a series")
    parser.add_argument("--data", required=True, help="Series CSV (date, component_1..component_J)")
    parser.add_argument("--config", required=True, help="Fit config document")
    parser.add_argument(
        "--engine",
        choices=[kind.value for kind in EngineKind],
        default=None,
        help="Overrides the config",
    )
    add_mask(parser)
    add_zero_policy(parser)
    parser.set_defaults(handler=run)


def apply_overrides(config: FitConfig, args) -> FitConfig:
    """Fold command-line flags into the fit config."""
    update = {}
    if args.engine:
        update["engine"] = EngineKind(args.engine)
    if args.zero_policy:
        update["zero_policy"] = args.zero_policy
    if args.mask:
        update["model"] = config.model.model_copy(update={"ar_mask": MaskKind(args.mask)})
    if args.seed is not None:
        update["sampler"] = config.sampler.model_copy(update={"seed": args.seed})
        update["optimizer"] = config.optimizer.model_copy(update={"seed": args.seed})
    if not update:
        return config
    # re-validate so the overridden model still passes its checks
    return FitConfig.model_validate({**config.model_dump(), **update})


def run(args) -> int:
    check_seed(args.seed)
    config, raw = read_flat_config(args.config, FitConfig)
    config = apply_overrides(config, args)
    series = read_series(
        args.data,
        zero_policy=config.zero_policy,
        epsilon=config.epsilon,
        trend_scale=config.trend_scale,
    )
    out = prepare_out(args.out)
    seed = config.sampler.seed if config.engine is EngineKind.BAYES else config.optimizer.seed
    config_bytes = raw + config.model_dump_json().encode()
    manifest = RunManifest.start(NAME, seed, {"data": args.data}, config_bytes)

    engine = get_engine(
        config.engine, sampler=config.sampler, optimizer=config.optimizer, threads=args.threads
    )
    fit = engine.fit(config.model, series)
    written = save_fit(out, fit, series)

    manifest.settings = {**engine.describe(), **fit.summary()}
    if isinstance(fit, PosteriorDraws):
        manifest.warnings = list(fit.diagnostics.warnings)
    report_warnings(manifest.warnings)
    manifest.write(out, written)
    return 0
