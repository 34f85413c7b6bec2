"""Pareto-smoothed importance sampling.

Smoothing is arviz's ``psislw``: the largest importance ratios are replaced
by expected order statistics of a generalized Pareto distribution fitted to
them. The fitted shape k-hat doubles as the reliability diagnostic: above
roughly 0.7 the importance estimate is not trusted and the caller refits.
"""

import logging
from typing import Tuple

import arviz as az
import numpy as np
from arviz.stats.stats import _gpdfit
from scipy import stats

from bdarma.exceptions import UsageError

logger = logging.getLogger(__name__)

MIN_TAIL = 5


def fit_gpd_tail(exceedances: np.ndarray) -> Tuple[float, float]:
    """Fit a generalized Pareto distribution to tail exceedances.

    Uses the empirical Bayes estimator that ``psis_smooth`` applies to the
    weight tail, so the shape matches the k-hat reported there.

    Args:
        exceedances: Non-negative values above the tail cutoff (any order)

    Returns:
        (k_hat, sigma_hat); a constant tail gives (-inf, 0.0)

    Raises:
        UsageError: Fewer than five values
    """
    ary = np.sort(np.asarray(exceedances, dtype=float))
    if ary.size < MIN_TAIL:
        raise UsageError(f"need at least {MIN_TAIL} tail values, got {ary.size}")
    if np.ptp(ary) == 0.0:
        return float("-inf"), 0.0
    k, sigma = _gpdfit(ary)
    return float(k), float(sigma)


def gpd_quantile(probs: np.ndarray, k: float, sigma: float) -> np.ndarray:
    """Inverse CDF of the generalized Pareto distribution (location 0)."""
    probs = np.asarray(probs, dtype=float)
    if sigma <= 0:
        return np.full_like(probs, np.nan)
    return stats.genpareto.ppf(probs, c=k, scale=sigma)


def psis_smooth(log_weights: np.ndarray, reff: float = 1.0) -> Tuple[np.ndarray, float]:
    """Smooth and normalize importance log weights.

    Args:
        log_weights: Raw log importance ratios, one per draw
        reff: Relative efficiency of the draws, scales the tail length

    Returns:
        (normalized smoothed log weights, k_hat). k_hat is +inf when fewer
        than five draws lie above the tail cutoff and -inf when the weights
        are constant; in both cases the weights are only normalized.
    """
    x = np.array(log_weights, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise UsageError("log weights must be a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise UsageError("log weights must be finite")
    if reff <= 0:
        raise UsageError(f"reff must be positive, got {reff}")
    if np.ptp(x) == 0.0:
        return np.full(x.size, -np.log(x.size)), float("-inf")
    smoothed, k = az.psislw(x, reff=reff)
    return np.asarray(smoothed, dtype=float), float(k)
