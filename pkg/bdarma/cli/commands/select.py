"""``bdarma select``: rank candidate models by leave-future-out ELPD.

Writes ``ranking.csv`` (best first, ELPD differences against the best
and their standard errors, refit counts) and one ``lfo_<k>.csv`` per
candidate with the pointwise scores. A candidate that cannot be fitted
is logged and listed with ``status = failed``; the others are still
ranked.
"""

import argparse
import logging
from typing import Dict, List

import numpy as np
import pandas as pd

from bdarma.cli.options import add_zero_policy, check_seed, prepare_out
from bdarma.core.selection import LfoReport, compare_models, lfo_elpd_exact, lfo_elpd_psis
from bdarma.exceptions import FitFailedError, NonFiniteError
from bdarma.io.artifacts import read_series, write_csv
from bdarma.io.config import SelectConfig, read_flat_config
from bdarma.io.manifest import RunManifest
from bdarma.utils import keyed_seed

logger = logging.getLogger(__name__)

NAME = "select"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        NAME, parents=[parent], help="Compare candidate models by LFO ELPD"
    )
    parser.add_argument("--data", required=True, help="Series CSV")
    parser.add_argument("--config", required=True, help="Candidates config document")
    parser.add_argument(
        "--method", choices=["psis", "exact"], default=None, help="Overrides the config"
    )
    add_zero_policy(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    check_seed(args.seed)
    config, raw = read_flat_config(args.config, SelectConfig)
    method = args.method or config.method
    zero_policy = args.zero_policy or config.zero_policy
    seed = config.sampler.seed if args.seed is None else args.seed
    series = read_series(args.data, zero_policy=zero_policy, epsilon=config.epsilon)
    out = prepare_out(args.out)
    config_bytes = raw + f"|{method}|{seed}".encode()
    manifest = RunManifest.start(NAME, seed, {"data": args.data}, config_bytes)
    score = lfo_elpd_psis if method == "psis" else lfo_elpd_exact

    reports: Dict[str, LfoReport] = {}
    failed: List[str] = []
    written = []
    for position, candidate in enumerate(config.candidates):
        sampler = config.sampler.model_copy(update={"seed": keyed_seed(seed, position)})
        try:
            report = score(
                candidate.model,
                series,
                config.lfo,
                sampler,
                threads=args.threads,
                model=candidate.name,
            )
        except (FitFailedError, NonFiniteError) as exc:
            logger.error(f"Candidate {candidate.name} failed: {exc}", exc_info=True)
            failed.append(candidate.name)
            continue
        reports[candidate.name] = report
        written.append(write_csv(report.to_frame(), out / f"lfo_{position}.csv"))

    if not reports:
        raise FitFailedError("every candidate failed to fit", reasons=failed)
    ranking = compare_models(reports)
    ranking["status"] = "ok"
    if failed:
        rows = pd.DataFrame(
            {column: np.nan for column in ranking.columns if column != "status"},
            index=pd.Index(failed, name="model"),
        )
        rows["status"] = "failed"
        ranking = pd.concat([ranking, rows])
    written.append(write_csv(ranking.reset_index(), out / "ranking.csv"))
    for name, report in reports.items():
        logger.info(report.summary_line())

    manifest.settings = {
        "method": method,
        "candidates": [c.name for c in config.candidates],
        "failed": failed,
    }
    manifest.warnings = [f"candidate {name} failed to fit" for name in failed]
    manifest.write(out, written)
    return 0
