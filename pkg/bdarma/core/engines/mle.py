"""Maximum likelihood for DARMA models (no prior).

BFGS on the free parameter slots with the analytic gradient, restarted from
fresh uniform initial values when an attempt fails. Standard errors come
from a central-difference Hessian of the analytic gradient at the optimum.
"""

import logging
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize
from scipy.stats import norm

from bdarma.core.engines.base import BaseEngine, FitResult
from bdarma.core.model.likelihood import DarmaLikelihood
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec
from bdarma.exceptions import BdarmaError, FitFailedError, UsageError
from bdarma.utils import keyed_generator

logger = logging.getLogger(__name__)

NON_FINITE = "non_finite_objective"
LINE_SEARCH_STALL = "line_search_stall"
MAX_ITERATIONS = "max_iterations"
HESSIAN_NOT_PD = "hessian_not_pd"
DEGENERATE_DESIGN = "degenerate_design"

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class OptimizerConfig(BaseModel):
    """BFGS settings shared by the DARMA and tVARMA maximum likelihood fits."""

    model_config = ConfigDict(frozen=True)

    gtol: float = Field(1e-6, gt=0)
    max_iter: int = Field(2000, ge=1)
    retries: int = Field(8, ge=0, description="Fresh restarts after the first attempt")
    init_range: float = Field(1.0, gt=0)
    stall_gradient: float = Field(
        1e-3, gt=0, description="Accept a precision-loss exit when the max gradient is below this"
    )
    hessian_step: float = Field(1e-4, gt=0)
    n_paths: int = Field(1000, ge=1, description="Forecast trajectories simulated at the estimate")
    seed: int = Field(0, ge=0)


class MleResult(FitResult):
    """Point estimate with asymptotic covariance.

    Attributes:
        estimate: Full-layout estimate (masked slots zero)
        covariance: (C, C) inverse observed information; zero rows for masked slots
        converged: False when every attempt failed
        attempts: Number of optimizer runs used
        reasons: Reason code of every failed attempt
        log_likelihood: Maximized log-likelihood
    """

    engine: str = "mle-darma"
    estimate: np.ndarray
    covariance: np.ndarray
    converged: bool = True
    attempts: int = 1
    reasons: List[str] = Field(default_factory=list)
    log_likelihood: float = float("nan")
    n_iterations: int = 0
    n_paths: int = 1000

    @property
    def retries(self) -> int:
        return max(0, self.attempts - 1)

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def point_estimate(self) -> np.ndarray:
        return self.estimate

    def intervals(self, level: float = 0.95) -> np.ndarray:
        half = norm.ppf(0.5 + level / 2.0) * self.standard_errors
        return np.column_stack([self.estimate - half, self.estimate + half])

    def parameter_draws(self, n_paths: Optional[int] = None) -> np.ndarray:
        count = self.n_paths if n_paths is None else n_paths
        return np.tile(self.estimate, (count, 1))

    def summary(self) -> Dict[str, Any]:
        return {
            "engine": self.engine,
            "converged": self.converged,
            "attempts": self.attempts,
            "reasons": list(self.reasons),
            "log_likelihood": self.log_likelihood,
        }


def central_difference_hessian(
    gradient: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float
) -> np.ndarray:
    """Symmetrized Jacobian of ``gradient`` by central differences, h_c = step * max(1, |x_c|)."""
    n = x.size
    hessian = np.empty((n, n))
    for c in range(n):
        h = step * max(1.0, abs(x[c]))
        up, down = x.copy(), x.copy()
        up[c] += h
        down[c] -= h
        hessian[:, c] = (gradient(up) - gradient(down)) / (2.0 * h)
    return 0.5 * (hessian + hessian.T)


def covariance_from_hessian(hessian: np.ndarray) -> Optional[np.ndarray]:
    """Inverse of the observed information -H, or None when it is not positive definite."""
    info = -hessian
    try:
        factor = cho_factor(info, lower=True)
    except (LinAlgError, ValueError):
        return None
    return cho_solve(factor, np.eye(info.shape[0]))


def bfgs_attempt(objective: Objective, x0: np.ndarray, config: OptimizerConfig):
    """Run one BFGS minimization. Returns (scipy result, reason code or None)."""
    result = minimize(
        objective,
        x0,
        jac=True,
        method="BFGS",
        options={"gtol": config.gtol, "maxiter": config.max_iter},
    )
    if not np.isfinite(result.fun):
        return result, NON_FINITE
    if result.success:
        return result, None
    if result.status == 1:
        return result, MAX_ITERATIONS
    grad = np.asarray(result.jac)
    if np.all(np.isfinite(grad)) and np.max(np.abs(grad)) < config.stall_gradient:
        return result, None
    if not np.all(np.isfinite(grad)):
        return result, NON_FINITE
    return result, LINE_SEARCH_STALL


def negated(likelihood: DarmaLikelihood) -> Objective:
    """Negative log-likelihood over the free slots; failures read as +inf."""
    layout = likelihood.layout

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        try:
            value, grad = likelihood.value_and_grad(layout.expand(x))
        except (BdarmaError, FloatingPointError, ArithmeticError):
            return np.inf, np.zeros_like(x)
        return -value, -grad[layout.free_index]

    return objective


def fit_mle_darma(
    spec: ModelSpec,
    series: CompositionalSeries,
    config: Optional[OptimizerConfig] = None,
) -> MleResult:
    """Maximize the conditional Dirichlet likelihood.

    Returns a result with ``converged=False`` and one reason code per
    attempt when all 1 + retries attempts fail; never raises for that.

    Raises:
        UsageError: The series leaves no step after the first max(P, Q)
    """
    config = config or OptimizerConfig()
    if series.n_times <= spec.max_lag:
        raise UsageError(
            f"series of length {series.n_times} is too short for max(P, Q) = {spec.max_lag}",
            t=spec.max_lag + 1,
        )
    started = time.perf_counter()
    likelihood = DarmaLikelihood(spec, series)
    layout = likelihood.layout
    objective = negated(likelihood)

    def gradient(x: np.ndarray) -> np.ndarray:
        return likelihood.value_and_grad(layout.expand(x))[1][layout.free_index]

    reasons: List[str] = []
    best = None
    for attempt in range(config.retries + 1):
        rng = keyed_generator(config.seed, attempt)
        x0 = rng.uniform(-config.init_range, config.init_range, size=layout.n_free)
        result, reason = bfgs_attempt(objective, x0, config)
        if reason is None:
            try:
                hessian = central_difference_hessian(gradient, result.x, config.hessian_step)
            except (BdarmaError, ArithmeticError):
                hessian = None
            free_cov = None if hessian is None else covariance_from_hessian(hessian)
            if free_cov is not None:
                covariance = np.zeros((layout.size, layout.size))
                covariance[np.ix_(layout.free_index, layout.free_index)] = free_cov
                elapsed = time.perf_counter() - started
                logger.info(
                    f"MLE converged on attempt {attempt + 1}: log-likelihood {-result.fun:.4f} "
                    f"({result.nit} iterations, {elapsed:.1f}s)"
                )
                return MleResult(
                    spec=spec,
                    names=layout.names,
                    estimate=layout.expand(result.x),
                    covariance=covariance,
                    attempts=attempt + 1,
                    reasons=reasons,
                    log_likelihood=float(-result.fun),
                    n_iterations=int(result.nit),
                    n_paths=config.n_paths,
                    elapsed_seconds=elapsed,
                )
            reason = HESSIAN_NOT_PD
        reasons.append(reason)
        logger.debug(f"MLE attempt {attempt + 1} failed: {reason}")
        if np.isfinite(result.fun) and (best is None or result.fun < best.fun):
            best = result

    logger.warning(f"MLE failed after {len(reasons)} attempts: {', '.join(reasons)}")
    estimate = layout.expand(best.x) if best is not None else np.full(layout.size, np.nan)
    return MleResult(
        spec=spec,
        names=layout.names,
        estimate=estimate,
        covariance=np.full((layout.size, layout.size), np.nan),
        converged=False,
        attempts=len(reasons),
        reasons=reasons,
        log_likelihood=float(-best.fun) if best is not None else float("nan"),
        n_paths=config.n_paths,
        elapsed_seconds=time.perf_counter() - started,
    )


class DarmaMleEngine(BaseEngine):
    """Fits DARMA models by maximum likelihood."""

    name = "mle-darma"

    def __init__(self, config: Optional[OptimizerConfig] = None):
        self.config = config or OptimizerConfig()

    def fit(self, spec: ModelSpec, series: CompositionalSeries) -> MleResult:
        result = fit_mle_darma(spec, series, self.config)
        if not result.converged:
            raise FitFailedError(
                "DARMA maximum likelihood did not converge", reasons=result.reasons
            )
        return result

    def describe(self) -> Dict[str, Any]:
        return {"engine": self.name, **self.config.model_dump()}
