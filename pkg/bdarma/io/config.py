"""Flat key-value configuration documents.

One ``key = value`` per line. ``#`` starts a comment, dotted keys build
nested sections, and numeric segments index lists::

    model.n_components = 3
    model.ar_mask = "nearest_neighbor"
    model.prior.ar.kind = banded_normal
    models.0.name = "B-DARMA"
    true_params.ar = [[[0.95, -0.18], [0.3, 0.95]]]

Values are JSON literals; anything that does not parse as JSON is taken
as a bare string. Errors carry the 1-based line of the offending key.

Example:
    >>> from bdarma.io.config import load_flat_config, dump_flat_config
    >>> spec = load_flat_config("n_components = 3\\nma_order = 1", ModelSpec)
    >>> load_flat_config(dump_flat_config(spec), ModelSpec) == spec
    True
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Set, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from bdarma.core.engines import EngineKind, OptimizerConfig, SamplerConfig
from bdarma.core.model.spec import ModelSpec
from bdarma.core.selection import LfoConfig
from bdarma.exceptions import ConfigError

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)

# tags pydantic inserts into error locations of discriminated unions
_DISCRIMINATOR_TAGS = {"normal", "banded_normal", "design_normal", "gamma_intercept", "horseshoe"}


# ---------------------------------------------------------------------------
# Command documents
# ---------------------------------------------------------------------------


class FitConfig(BaseModel):
    """Document read by ``bdarma fit``."""

    model_config = ConfigDict(frozen=True)

    model: ModelSpec
    engine: EngineKind = Field(EngineKind.BAYES, description="bayes, mle-darma or tvarma")
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    zero_policy: Literal["reject", "epsilon"] = "reject"
    epsilon: float = Field(1e-6, gt=0, lt=1)
    trend_scale: Optional[float] = Field(None, gt=0, description="Defaults to the number of rows")


class Candidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    model: ModelSpec


class SelectConfig(BaseModel):
    """Document read by ``bdarma select``."""

    model_config = ConfigDict(frozen=True)

    candidates: List[Candidate] = Field(..., min_length=2)
    lfo: LfoConfig = Field(default_factory=LfoConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    method: Literal["psis", "exact"] = "psis"
    zero_policy: Literal["reject", "epsilon"] = "reject"
    epsilon: float = Field(1e-6, gt=0, lt=1)

    @model_validator(mode="after")
    def _unique_names(self) -> "SelectConfig":
        names = [c.name for c in self.candidates]
        if len(set(names)) != len(names):
            raise ValueError("candidate names must be unique")
        return self


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _listify(node: Any, path: str, lines: Dict[str, int]) -> Any:
    """Turn dicts whose keys are all integers into lists."""
    if not isinstance(node, dict):
        return node
    converted = {
        key: _listify(value, f"{path}.{key}" if path else key, lines)
        for key, value in node.items()
    }
    if converted and all(key.isdigit() for key in converted):
        indices = sorted(int(key) for key in converted)
        if indices != list(range(len(indices))):
            first = f"{path}.{indices[0]}" if path else str(indices[0])
            raise ConfigError(
                f"list {path!r} has indices {indices}; expected 0..{len(indices) - 1}",
                line=lines.get(first),
                key=path,
            )
        return [converted[str(i)] for i in indices]
    return converted


def parse_flat_config(text: str) -> Tuple[Dict[str, Any], Dict[str, int]]:
    """Parse a document into a nested dict plus the line of every key.

    Raises:
        ConfigError: Malformed line, duplicate key or a key that is both a
            section and a value
    """
    tree: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(line)
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", line=number)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key or any(not segment for segment in key.split(".")):
            raise ConfigError(f"malformed key {key!r}", line=number, key=key)
        if raw == "":
            raise ConfigError(f"missing value for {key!r}", line=number, key=key)
        if key in lines:
            raise ConfigError(
                f"duplicate key {key!r} (first on line {lines[key]})", line=number, key=key
            )
        lines[key] = number

        node = tree
        segments = key.split(".")
        for segment in segments[:-1]:
            child = node.setdefault(segment, {})
            if not isinstance(child, dict):
                raise ConfigError(
                    f"{key!r} extends a key that already holds a value", line=number, key=key
                )
            node = child
        if segments[-1] in node:
            raise ConfigError(f"{key!r} is already a section", line=number, key=key)
        node[segments[-1]] = _parse_value(raw)
    return _listify(tree, "", lines), lines


def _strip_comment(line: str) -> str:
    """Drop a trailing comment, ignoring '#' inside double-quoted strings."""
    quoted = False
    escaped = False
    for i, char in enumerate(line):
        if escaped:
            escaped = False
        elif char == "\\":
            escaped = True
        elif char == '"':
            quoted = not quoted
        elif char == "#" and not quoted:
            return line[:i].strip()
    return line.strip()


def _flatten(node: Any, prefix: str = "") -> Dict[str, Any]:
    """Dotted leaves; lists of objects are indexed, other lists stay JSON values."""
    out: Dict[str, Any] = {}
    if isinstance(node, dict):
        for key, value in node.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            if isinstance(value, (dict, list)) and value and (
                isinstance(value, dict) or all(isinstance(item, dict) for item in value)
            ):
                out.update(_flatten(value, path))
            else:
                out[path] = value
    elif isinstance(node, list):
        for index, value in enumerate(node):
            out.update(_flatten(value, f"{prefix}.{index}"))
    return out


def _known_paths(dumped: Dict[str, Any]) -> Set[str]:
    known: Set[str] = set()
    for path in _flatten(dumped):
        segments = path.split(".")
        for end in range(1, len(segments) + 1):
            known.add(".".join(segments[:end]))
    return known


def _line_for(loc: Tuple[Union[str, int], ...], lines: Dict[str, int]) -> Tuple[Optional[int], str]:
    """Line of the most specific key matching a pydantic error location."""
    parts = [str(p) for p in loc if not (isinstance(p, str) and p in _DISCRIMINATOR_TAGS)]
    for end in range(len(parts), 0, -1):
        key = ".".join(parts[:end])
        if key in lines:
            return lines[key], key
        below = [line for k, line in lines.items() if k.startswith(key + ".")]
        if below:
            return min(below), key
    return None, ".".join(parts)


def load_flat_config(text: str, model_cls: Type[M]) -> M:
    """Parse and validate a document as ``model_cls``.

    Raises:
        ConfigError: Parse error, invalid value or unknown key, with its line
    """
    tree, lines = parse_flat_config(text)
    try:
        model = model_cls.model_validate(tree)
    except ValidationError as exc:
        error = exc.errors()[0]
        line, key = _line_for(tuple(error["loc"]), lines)
        raise ConfigError(f"{key or '<root>'}: {error['msg']}", line=line, key=key) from exc
    known = _known_paths(model.model_dump(mode="json"))
    for key, line in sorted(lines.items(), key=lambda item: item[1]):
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", line=line, key=key)
    return model


def read_flat_config(path: Union[str, Path], model_cls: Type[M]) -> Tuple[M, bytes]:
    """Load a config file; returns the model and the raw bytes (for hashing)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    logger.debug(f"Loading {model_cls.__name__} from {path}")
    return load_flat_config(raw.decode("utf-8"), model_cls), raw


def dump_flat_config(model: BaseModel) -> str:
    """Render a model as a flat document that ``load_flat_config`` reads back."""
    leaves = _flatten(model.model_dump(mode="json"))
    lines = [f"{key} = {json.dumps(value)}" for key, value in leaves.items()]
    return "\n".join(lines) + "\n"
