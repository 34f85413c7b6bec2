"""Data generating models for the simulation studies.

DARMA: the recursion is iterated with y_t ~ Dirichlet(phi_t mu_t) and the
innovation e_t = link(y_t) - eta_t fed back. tVARMA: Gaussian innovations
with covariance Sigma are added to eta_t on the alr scale and the result
mapped back to the simplex.

Pre-sample lags are set to the regression mean (eta_0 = x beta) with zero
innovations, and ``burn_in`` steps are discarded before the kept window.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from bdarma.core.engines.tvarma import as_tvarma_spec
from bdarma.core.model.design import design_matrix
from bdarma.core.model.layout import ParamLayout
from bdarma.core.model.likelihood import LOG_SCALE_BOUND
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec, Parameterization, TrendKind
from bdarma.core.simplex import closure, dirichlet_sample_array
from bdarma.core.study.config import DgmConfig, DgmKind, TrueParams
from bdarma.exceptions import UsageError
from bdarma.utils import keyed_generator

logger = logging.getLogger(__name__)

BENCHMARK_TRUTH_KEY = 1_000_003
BENCHMARK_LOG_SCALE = float(np.log(1000.0))
BENCHMARK_SPECTRAL_RADIUS = 0.85


def simulate_path(
    spec: ModelSpec,
    theta: np.ndarray,
    n_times: int,
    rng: np.random.Generator,
    burn_in: int = 100,
    trend_scale: float = 1.0,
    covariance: Optional[np.ndarray] = None,
    max_abs_eta: float = 30.0,
) -> Tuple[Optional[np.ndarray], float]:
    """Simulate ``n_times`` compositions after ``burn_in`` discarded steps.

    Args:
        spec: Recursion to iterate
        theta: Full parameter vector in the layout of ``spec``
        n_times: Kept steps, at time indices 1..n_times
        rng: Random generator
        burn_in: Discarded steps before time 1
        trend_scale: Divisor of the trend column
        covariance: Gaussian innovation covariance (tVARMA); None draws Dirichlet
        max_abs_eta: Simulation stops once any |eta| exceeds this

    Returns:
        (observations of shape (n_times, J), largest |eta| seen). The
        observations are None when the path exploded.
    """
    layout = ParamLayout(spec)
    ar, ma, beta, gamma = layout.split(theta)
    d, J = spec.dim, spec.n_components
    P, Q, m = spec.ar_order, spec.ma_order, spec.max_lag
    c = 1.0 if spec.parameterization is Parameterization.CENTERED else 0.0
    link = spec.link_map()

    times = np.arange(1 - burn_in - m, n_times + 1)
    regression = design_matrix(spec.mean_design, times, trend_scale) @ beta.T
    log_scale = np.clip(
        design_matrix(spec.resolved_scale_design, times, trend_scale) @ gamma,
        -LOG_SCALE_BOUND,
        LOG_SCALE_BOUND,
    )
    lower = np.linalg.cholesky(covariance) if covariance is not None else None

    total = times.size
    a = np.zeros((total, d))
    e = np.zeros((total, d))
    y = np.zeros((total, J))
    a[:m] = regression[:m]
    peak = 0.0
    for i in range(m, total):
        eta = regression[i].copy()
        for p in range(1, P + 1):
            eta += ar[p - 1] @ (a[i - p] - c * regression[i - p])
        for q in range(1, Q + 1):
            eta += ma[q - 1] @ e[i - q]
        peak = max(peak, float(np.max(np.abs(eta))))
        if peak > max_abs_eta:
            return None, peak
        if lower is not None:
            e[i] = lower @ rng.standard_normal(d)
            a[i] = eta + e[i]
            y[i] = link.inverse(a[i])
        else:
            alpha = np.exp(log_scale[i]) * link.inverse(eta)
            y[i] = dirichlet_sample_array(alpha[None, :], rng)[0]
            a[i] = link.forward(y[i])
            e[i] = a[i] - eta
    return closure(y[-n_times:]), peak


def benchmark_truth(spec: ModelSpec, seed: int) -> TrueParams:
    """Synthetic truth for the many-component benchmark, derived from ``seed``.

    A is dense and stationary with bands decaying away from the diagonal,
    intercepts decrease monotonically over the components, and each Fourier
    block gets harmonics whose amplitude falls as 1/k.
    """
    rng = keyed_generator(seed, BENCHMARK_TRUTH_KEY)
    d = spec.dim
    offset = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))

    ar = []
    for _ in range(spec.ar_order):
        signs = rng.choice([-1.0, 1.0], size=(d, d))
        matrix = np.where(offset == 0, 0.5, 0.15 * 0.6 ** (offset - 1) * signs)
        radius = np.max(np.abs(np.linalg.eigvals(matrix)))
        if radius > BENCHMARK_SPECTRAL_RADIUS:
            matrix *= BENCHMARK_SPECTRAL_RADIUS / radius
        ar.append((matrix * spec.ar_mask_matrix()).tolist())
    ma = [(0.2 * np.eye(d)).tolist() for _ in range(spec.ma_order)]

    def coefficients(design, intercept, n_rows):
        columns = []
        if design.intercept:
            columns.append(np.broadcast_to(intercept, (n_rows,)).astype(float))
        if design.trend is TrendKind.LINEAR:
            columns.append(rng.normal(0.0, 0.05, n_rows))
        for term in design.fourier:
            amplitude = 0.3 if term.period > 30 else 0.15
            for k in range(1, term.harmonics + 1):
                columns.append(rng.normal(0.0, amplitude / k, n_rows))
                columns.append(rng.normal(0.0, amplitude / k, n_rows))
        if not columns:
            return np.zeros((n_rows, 0))
        return np.column_stack(columns)

    beta = coefficients(spec.mean_design, np.linspace(1.5, 0.2, d), d)
    gamma = coefficients(spec.resolved_scale_design, BENCHMARK_LOG_SCALE, 1)[0]
    if spec.resolved_scale_design.fourier:
        # seasonal terms of log(phi) stay small
        intercept = int(spec.resolved_scale_design.intercept)
        gamma[intercept:] *= 0.1
    return TrueParams(ar=ar, ma=ma, beta=beta.tolist(), gamma=gamma.tolist())


def resolve_truth(config: DgmConfig) -> TrueParams:
    if config.true_params is not None:
        return config.true_params
    return benchmark_truth(dgm_spec(config), config.seed)


def dgm_spec(config: DgmConfig) -> ModelSpec:
    if config.dgm is DgmKind.TVARMA:
        return as_tvarma_spec(config.dgm_spec)
    return config.dgm_spec


def simulate_replicate(config: DgmConfig, replicate_index: int) -> Tuple[CompositionalSeries, int]:
    """Series of replicate ``replicate_index`` and the number of regenerations it took.

    Attempt a of replicate r draws from the stream keyed (r, a).

    Raises:
        UsageError: Every attempt exploded; the true parameters are not stationary
    """
    spec = dgm_spec(config)
    truth = resolve_truth(config)
    theta = truth.to_vector(spec)
    covariance = truth.covariance(spec.dim) if config.dgm is DgmKind.TVARMA else None
    for attempt in range(config.max_regenerations + 1):
        rng = keyed_generator(config.seed, replicate_index, attempt)
        observations, peak = simulate_path(
            spec,
            theta,
            config.t_total,
            rng,
            burn_in=config.burn_in,
            trend_scale=config.trend_scale,
            covariance=covariance,
            max_abs_eta=config.max_abs_eta,
        )
        if observations is not None:
            if attempt:
                logger.warning(f"Replicate {replicate_index} regenerated {attempt} times")
            series = CompositionalSeries(
                observations=observations, trend_scale=config.trend_scale, epoch=config.start_date
            )
            return series, attempt
        logger.debug(f"Replicate {replicate_index} attempt {attempt} exploded (|eta| = {peak:.1f})")
    raise UsageError(
        f"replicate {replicate_index} exploded in all {config.max_regenerations + 1} attempts; "
        "the DGM parameters are not stationary"
    )


def generate_dgm(config: DgmConfig, replicate_index: int) -> CompositionalSeries:
    """Simulated series of one replicate (t_total steps)."""
    series, _ = simulate_replicate(config, replicate_index)
    return series
