"""Utility functions shared across bdarma.

Provides the seed-splitting rule, content hashing for run manifests, the
float format used by every CSV writer, and an order-preserving thread map.

Seed splitting rule:
    One master seed drives a run. Independent streams are derived with
    ``numpy.random.SeedSequence``:

    - ``spawn_generators(seed, n)`` -> ``SeedSequence(seed).spawn(n)`` (chains)
    - ``keyed_generator(seed, *key)`` -> ``SeedSequence(seed, spawn_key=key)``
      (replicate ``r`` uses key ``(r,)``, regeneration attempt ``a`` uses
      ``(r, a)``, a refit at time ``t`` uses ``(t,)``)

    Keyed streams only depend on the key, never on scheduling order, so the
    thread count cannot change any number.
"""

import hashlib
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar, Union

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# 17 significant digits round-trip every IEEE double
FLOAT_FORMAT = "%.17g"


def config_hash(*parts: Union[BaseModel, bytes, str]) -> str:
    """SHA-256 over configuration models, raw file bytes and strings.

    Args:
        *parts: Pydantic models (hashed through their JSON dump), bytes or text

    Returns:
        Hex digest covering all parts in order
    """
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, BaseModel):
            payload = part.model_dump_json().encode()
        elif isinstance(part, bytes):
            payload = part
        else:
            payload = str(part).encode()
        digest.update(len(payload).to_bytes(8, "little"))
        digest.update(payload)
    return digest.hexdigest()


def spawn_generators(seed: int, n: int) -> List[np.random.Generator]:
    """Derive ``n`` independent generators from one master seed."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(n)]


def keyed_generator(seed: int, *key: int) -> np.random.Generator:
    """Derive the generator identified by ``key`` under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def keyed_seed(seed: int, *key: int) -> int:
    """Derive an integer seed identified by ``key`` (for nested runs that fan out again)."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)).generate_state(1)
    return int(state[0])


def resolve_threads(threads: Optional[int]) -> int:
    """Number of worker threads; ``None`` or ``0`` means all available cores."""
    if not threads:
        return max(1, os.cpu_count() or 1)
    return max(1, int(threads))


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> List[R]:
    """Apply ``func`` to every item, results ordered like the input.

    Args:
        func: Callable applied to each item
        items: Work items
        threads: Worker count (``1`` runs inline, ``None``/``0`` uses all cores)

    Returns:
        List of results in input order
    """
    work: Sequence[T] = list(items)
    workers = min(resolve_threads(threads), max(1, len(work)))
    if workers == 1:
        return [func(item) for item in work]
    logger.debug(f"Dispatching {len(work)} tasks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, work))
