"""File formats: flat config documents, CSV artifacts and run manifests."""

from .artifacts import (
    FitMetadata,
    LoadedFit,
    draws_from_frame,
    draws_to_frame,
    load_fit,
    mle_from_frame,
    mle_to_frame,
    read_csv,
    read_series,
    save_fit,
    series_from_frame,
    series_to_frame,
    write_csv,
    write_series,
)
from .config import (
    Candidate,
    FitConfig,
    SelectConfig,
    dump_flat_config,
    load_flat_config,
    parse_flat_config,
    read_flat_config,
)
from .manifest import MANIFEST_FILE, RunManifest

__all__ = [
    "FitMetadata",
    "LoadedFit",
    "draws_from_frame",
    "draws_to_frame",
    "load_fit",
    "mle_from_frame",
    "mle_to_frame",
    "read_csv",
    "read_series",
    "save_fit",
    "series_from_frame",
    "series_to_frame",
    "write_csv",
    "write_series",
    "Candidate",
    "FitConfig",
    "SelectConfig",
    "dump_flat_config",
    "load_flat_config",
    "parse_flat_config",
    "read_flat_config",
    "MANIFEST_FILE",
    "RunManifest",
]
