"""``bdarma simulate``: draw one replicate from a data generating model.

Writes ``series.csv`` (the whole window), ``train.csv`` / ``test.csv``
when the config sets ``t_train`` below ``t_total``, ``truth.csv`` with the
true coefficients, and the manifest.

Example:
    bdarma simulate --preset simulation_1 --seed 7 --out runs/sim1
"""

import argparse
from pathlib import Path
from typing import Tuple

import pandas as pd

from bdarma.cli.options import check_seed, prepare_out
from bdarma.core.model.layout import ParamLayout
from bdarma.core.study import PRESETS, DgmConfig, StudyConfig, simulate_replicate
from bdarma.core.study.dgm import dgm_spec, resolve_truth
from bdarma.exceptions import ConfigError, UsageError
from bdarma.io.artifacts import series_to_frame, write_csv, write_series
from bdarma.io.config import load_flat_config, parse_flat_config
from bdarma.io.manifest import RunManifest

NAME = "simulate"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(NAME, parents=[parent], help="Simulate a compositional series")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", help="DGM or study config document")
    source.add_argument("--preset", choices=sorted(PRESETS), help="Built-in study")
    parser.add_argument("--replicate", type=int, default=0, help="Replicate index (default 0)")
    parser.set_defaults(handler=run)


def _load(args) -> Tuple[DgmConfig, bytes]:
    if args.preset:
        return PRESETS[args.preset](False), args.preset.encode()
    path = Path(args.config)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    text = raw.decode("utf-8")
    tree, _ = parse_flat_config(text)
    # a study document also describes a DGM
    model_cls = StudyConfig if "models" in tree else DgmConfig
    return load_flat_config(text, model_cls), raw


def run(args) -> int:
    check_seed(args.seed)
    if args.replicate < 0:
        raise UsageError(f"--replicate must be non-negative, got {args.replicate}")
    config, raw = _load(args)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    out = prepare_out(args.out)
    manifest = RunManifest.start(NAME, config.seed, {}, raw + config.model_dump_json().encode())

    series, regenerations = simulate_replicate(config, args.replicate)
    written = [write_series(series, out / "series.csv")]
    t_train = config.t_train
    if t_train is not None and t_train < series.n_times:
        written.append(write_series(series.truncate(t_train), out / "train.csv"))
        frame = series_to_frame(series).iloc[t_train:]
        written.append(write_csv(frame, out / "test.csv"))

    spec = dgm_spec(config)
    truth = resolve_truth(config).to_vector(spec)
    truth_frame = pd.DataFrame({"parameter": ParamLayout(spec).names, "value": truth})
    written.append(write_csv(truth_frame, out / "truth.csv"))
    manifest.settings = {
        "replicate": args.replicate,
        "regenerations": regenerations,
        "dgm": config.dgm.value,
    }
    manifest.write(out, written)
    return 0
