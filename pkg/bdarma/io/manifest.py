"""Run manifests: one ``manifest.json`` per output directory."""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field

from bdarma import __version__
from bdarma.utils import config_hash

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    """What produced an output directory.

    Attributes:
        command: Subcommand name
        config_hash: SHA-256 over the config bytes and every input file
        seed: Master seed of the run
        started: UTC timestamp at start
        finished: UTC timestamp when the manifest was written
        artifacts: Files written, relative to the directory
        inputs: Input paths as given on the command line
        settings: Resolved engine/run settings
        warnings: Diagnostics raised during the run
    """

    command: str
    config_hash: str
    seed: int
    version: str
    started: str = Field(default_factory=_now)
    finished: Optional[str] = None
    artifacts: List[str] = Field(default_factory=list)
    inputs: Dict[str, str] = Field(default_factory=dict)
    settings: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)

    @classmethod
    def start(
        cls,
        command: str,
        seed: int,
        inputs: Dict[str, Union[str, Path]],
        config_bytes: bytes = b"",
    ) -> "RunManifest":
        """Open a manifest; the hash covers the config and every input file's bytes."""
        parts: List[Union[bytes, str]] = [command, config_bytes, str(seed)]
        for name in sorted(inputs):
            path = Path(inputs[name])
            parts.append(name)
            if path.is_file():
                parts.append(path.read_bytes())
            elif path.is_dir():
                children = (p for p in path.iterdir() if p.is_file() and p.name != MANIFEST_FILE)
                for child in sorted(children):
                    parts.extend([child.name, child.read_bytes()])
        return cls(
            command=command,
            config_hash=config_hash(*parts),
            seed=seed,
            version=__version__,
            inputs={name: str(path) for name, path in inputs.items()},
        )

    def write(self, out_dir: Union[str, Path], written: List[Path]) -> Path:
        """Record ``written`` (made relative to ``out_dir``) and save the manifest."""
        out_dir = Path(out_dir)
        relative = sorted({str(Path(p).resolve().relative_to(out_dir.resolve())) for p in written})
        final = self.model_copy(update={"artifacts": relative, "finished": _now()})
        path = out_dir / MANIFEST_FILE
        path.write_text(final.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.debug(f"Wrote {path}")
        return path
