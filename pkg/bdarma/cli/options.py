"""Flags shared by every subcommand, and small helpers the commands reuse."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from bdarma.core.model.spec import MaskKind
from bdarma.exceptions import UsageError

logger = logging.getLogger(__name__)


def common_parent() -> argparse.ArgumentParser:
    """Parent parser carrying --out, --seed, --threads, --verbose and --quiet."""
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--out", type=Path, required=True, help="Output directory (created if missing)"
    )
    parent.add_argument("--seed", type=int, default=None, help="Master seed (overrides the config)")
    parent.add_argument(
        "--threads", type=int, default=None, help="Worker threads (default: all available cores)"
    )
    noise = parent.add_mutually_exclusive_group()
    noise.add_argument("--verbose", action="store_true", help="Debug logging")
    noise.add_argument("--quiet", action="store_true", help="No log output")
    return parent


def add_zero_policy(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--zero-policy",
        choices=["reject", "epsilon"],
        default=None,
        help="How non-positive shares are handled (default: the config's, else reject)",
    )


def add_mask(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mask",
        choices=[kind.value for kind in MaskKind],
        default=None,
        help="Mask of the AR matrices (overrides the config)",
    )


def check_seed(seed: Optional[int]) -> None:
    if seed is not None and seed < 0:
        raise UsageError(f"--seed must be non-negative, got {seed}")


def prepare_out(out: Path) -> Path:
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out {out} exists and is not a directory")
    out.mkdir(parents=True, exist_ok=True)
    return out


def report_warnings(warnings: List[str]) -> None:
    """Print a warning block to stderr; warnings never change the exit code."""
    if not warnings:
        return
    print("warnings:", file=sys.stderr)
    for message in warnings:
        print(f"  - {message}", file=sys.stderr)
