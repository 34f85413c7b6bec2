"""Convergence diagnostics and posterior summaries.

R-hat and ESS come from arviz (rank-normalized split R-hat, bulk ESS) on
(chain, draw) arrays. Constant coordinates, such as masked slots, get
R-hat = 1 and ESS = number of draws instead of NaN.
"""

import logging
import warnings
from typing import List, Optional, Sequence

import arviz as az
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

RHAT_WARN = 1.05
DIVERGENCE_WARN_FRACTION = 0.01


def _is_constant(chains: np.ndarray) -> bool:
    return bool(np.ptp(chains) == 0.0)


def split_rhat(chains: np.ndarray) -> float:
    """Rank-normalized split R-hat of one coordinate, ``chains`` shaped (chain, draw)."""
    chains = np.asarray(chains, dtype=float)
    if _is_constant(chains):
        return 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return float(az.rhat(chains, method="rank"))


def effective_sample_size(chains: np.ndarray) -> float:
    """Bulk effective sample size of one coordinate, ``chains`` shaped (chain, draw)."""
    chains = np.asarray(chains, dtype=float)
    if _is_constant(chains):
        return float(chains.size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return float(az.ess(chains, method="bulk"))


def per_coordinate(draws: np.ndarray, chain: np.ndarray, func) -> np.ndarray:
    """Apply ``func`` to every column of stacked draws split into chains."""
    draws = np.asarray(draws, dtype=float)
    chain_ids = np.unique(chain)
    lengths = {int(np.sum(chain == c)) for c in chain_ids}
    if len(lengths) != 1:
        raise ValueError("all chains must hold the same number of draws")
    stacked = np.stack([draws[chain == c] for c in chain_ids])  # (chain, draw, C)
    return np.array([func(stacked[:, :, j]) for j in range(draws.shape[1])])


def convergence_warnings(
    rhat_values: np.ndarray,
    names: Sequence[str],
    n_divergent: int,
    n_draws: int,
) -> List[str]:
    """Human-readable convergence problems (empty when the run looks healthy)."""
    found: List[str] = []
    if n_draws and n_divergent > DIVERGENCE_WARN_FRACTION * n_draws:
        found.append(f"{n_divergent} of {n_draws} post-warm-up transitions diverged")
    bad = np.flatnonzero(np.asarray(rhat_values) > RHAT_WARN)
    if bad.size:
        worst = bad[np.argmax(np.asarray(rhat_values)[bad])]
        found.append(
            f"R-hat above {RHAT_WARN} for {bad.size} parameters "
            f"(worst {names[worst]}: {rhat_values[worst]:.3f})"
        )
    for message in found:
        logger.warning(message)
    return found


def summarize(
    draws: np.ndarray,
    names: Sequence[str],
    levels: Sequence[float] = (0.95,),
    chain: Optional[np.ndarray] = None,
) -> pd.DataFrame:
    """Per-coordinate mean, sd and central-interval quantiles.

    Quantiles use linear interpolation between order statistics (the
    ``linear`` method of ``numpy.quantile``). When chain ids are given the
    table also carries R-hat and ESS.

    Args:
        draws: Array (S*, C)
        names: Column names
        levels: Central interval levels, e.g. 0.95 adds q2.5 and q97.5
        chain: Optional chain id per draw

    Returns:
        DataFrame indexed by parameter name
    """
    draws = np.asarray(draws, dtype=float)
    ddof = 1 if draws.shape[0] > 1 else 0
    table = {"mean": draws.mean(axis=0), "sd": draws.std(axis=0, ddof=ddof)}
    for level in levels:
        tail = 100.0 * (1.0 - level) / 2.0
        probs = [tail / 100.0, 1.0 - tail / 100.0]
        lower, upper = np.quantile(draws, probs, axis=0, method="linear")
        table[f"q{tail:g}"] = lower
        table[f"q{100.0 - tail:g}"] = upper
    if chain is not None:
        table["rhat"] = per_coordinate(draws, chain, split_rhat)
        table["ess"] = per_coordinate(draws, chain, effective_sample_size)
    frame = pd.DataFrame(table, index=pd.Index(list(names), name="parameter"))
    return frame
