"""Gaussian VARMA on alr-transformed shares (the tVARMA baseline).

a_t = alr(y_t) follows the same linear predictor recursion as the DARMA
mean, with a_t = eta_t + eps_t and eps_t ~ N(0, Sigma). Sigma = L L^T is
parameterized by the lower Cholesky factor with log-diagonal entries.
Pure VAR models with full masks are solved in closed form by least
squares, which is the conditional Gaussian MLE; everything else goes
through BFGS.
"""

import logging
import time
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

from bdarma.core.engines.base import BaseEngine
from bdarma.core.engines.mle import (
    DEGENERATE_DESIGN,
    HESSIAN_NOT_PD,
    MleResult,
    OptimizerConfig,
    bfgs_attempt,
    central_difference_hessian,
    covariance_from_hessian,
)
from bdarma.core.model.likelihood import VarmaRecursion
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import (
    CovariateSpec,
    MaskKind,
    MaskSpec,
    ModelSpec,
    NormalPrior,
    Parameterization,
    PriorConfig,
)
from bdarma.core.simplex import Link
from bdarma.exceptions import BdarmaError, FitFailedError, UsageError
from bdarma.utils import keyed_generator

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def tvarma_spec(
    n_components: int,
    ar_order: int = 1,
    ma_order: int = 0,
    mean_design: Optional[CovariateSpec] = None,
    parameterization: Parameterization = Parameterization.UNCENTERED,
    ar_mask: MaskSpec = MaskKind.FULL,
    ma_mask: MaskSpec = MaskKind.FULL,
    reference: Optional[int] = None,
) -> ModelSpec:
    """ModelSpec describing the mean recursion of a tVARMA model (no scale design)."""
    return ModelSpec(
        n_components=n_components,
        ar_order=ar_order,
        ma_order=ma_order,
        link=Link.ALR,
        reference=reference,
        parameterization=parameterization,
        mean_design=mean_design or CovariateSpec(),
        scale_design=CovariateSpec(intercept=False),
        ar_mask=ar_mask,
        ma_mask=ma_mask,
        prior=PriorConfig(gamma=NormalPrior()),
    )


def as_tvarma_spec(spec: ModelSpec) -> ModelSpec:
    """Drop the scale design of a DARMA spec and force the alr link."""
    return spec.model_copy(
        update={
            "link": Link.ALR,
            "scale_design": CovariateSpec(intercept=False),
            "prior": PriorConfig(gamma=NormalPrior()),
        }
    )


class TvarmaResult(MleResult):
    """tVARMA fit: mean parameters plus the innovation covariance.

    Attributes:
        sigma: Innovation covariance (J-1, J-1)
        cholesky_params: Lower-triangle Cholesky parameters (log diagonal)
        cholesky_covariance: Asymptotic covariance of ``cholesky_params``
        degenerate: True when the regressors or residuals were rank deficient
    """

    engine: str = "tvarma"
    sigma: np.ndarray
    cholesky_params: np.ndarray
    cholesky_covariance: np.ndarray
    degenerate: bool = False

    @property
    def sigma_names(self) -> List[str]:
        d = self.sigma.shape[0]
        names = [f"sigma[{j}]" for j in range(1, d + 1)]
        names += [f"rho[{r},{s}]" for r in range(1, d + 1) for s in range(r + 1, d + 1)]
        return names

    def sigma_estimates(self) -> np.ndarray:
        """Standard deviations followed by the upper-triangle correlations."""
        return sigma_summary(self.cholesky_params, self.sigma.shape[0])

    def sigma_standard_errors(self) -> np.ndarray:
        """Delta-method standard errors of ``sigma_estimates``."""
        d = self.sigma.shape[0]
        base = self.cholesky_params
        jac = np.empty((len(self.sigma_names), base.size))
        for c in range(base.size):
            h = 1e-6 * max(1.0, abs(base[c]))
            up, down = base.copy(), base.copy()
            up[c] += h
            down[c] -= h
            jac[:, c] = (sigma_summary(up, d) - sigma_summary(down, d)) / (2.0 * h)
        cov = jac @ self.cholesky_covariance @ jac.T
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))

    def summary(self) -> Dict[str, Any]:
        out = super().summary()
        out["degenerate"] = self.degenerate
        out["sigma"] = dict(zip(self.sigma_names, self.sigma_estimates().tolist()))
        return out


def cholesky_from_params(params: np.ndarray, dim: int) -> np.ndarray:
    lower = np.zeros((dim, dim))
    lower[np.tril_indices(dim)] = params
    diag = np.diag_indices(dim)
    lower[diag] = np.exp(lower[diag])
    return lower


def params_from_cholesky(lower: np.ndarray) -> np.ndarray:
    work = np.array(lower, dtype=float)
    diag = np.diag_indices(work.shape[0])
    work[diag] = np.log(work[diag])
    return work[np.tril_indices(work.shape[0])]


def sigma_summary(params: np.ndarray, dim: int) -> np.ndarray:
    lower = cholesky_from_params(params, dim)
    sigma = lower @ lower.T
    sd = np.sqrt(np.diag(sigma))
    corr = sigma / np.outer(sd, sd)
    upper = np.triu_indices(dim, k=1)
    return np.concatenate([sd, corr[upper]])


class GaussianVarmaLikelihood(VarmaRecursion):
    """Conditional Gaussian log-likelihood of alr coordinates."""

    def __init__(self, spec: ModelSpec, series: CompositionalSeries):
        super().__init__(spec, series)
        d = self.layout.dim
        self.n_cholesky = d * (d + 1) // 2
        self.tril = np.tril_indices(d)
        self.diag_positions = np.flatnonzero(self.tril[0] == self.tril[1])

    def value_and_grad(
        self, theta: np.ndarray, chol_params: np.ndarray
    ) -> Tuple[float, np.ndarray, np.ndarray]:
        d, m, T = self.layout.dim, self.max_lag, self.n_times
        path = self.forward(theta)
        residuals = path.innovations[m:]
        n = residuals.shape[0]
        lower = cholesky_from_params(chol_params, d)
        whitened = cho_solve((lower, True), residuals.T).T  # rows Sigma^{-1} r_t
        value = (
            -0.5 * n * d * LOG_2PI
            - n * float(np.sum(np.log(np.diag(lower))))
            - 0.5 * float(np.sum(residuals * whitened))
        )
        grad_eta = np.zeros((T, d))
        grad_eta[m:] = whitened
        grad_theta = self.backward(theta, path, grad_eta)

        # d/dL of -n log|L| - tr(Sigma^{-1} S) / 2, S the residual cross-product
        precision_s = whitened.T @ whitened  # Sigma^{-1} S Sigma^{-1}
        grad_lower = precision_s @ lower
        grad_lower[np.diag_indices(d)] -= n / np.diag(lower)
        grad_chol = grad_lower[self.tril]
        grad_chol[self.diag_positions] *= np.diag(lower)
        return value, grad_theta, grad_chol


def _least_squares(recursion: GaussianVarmaLikelihood) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Closed-form VAR fit. Returns (full theta, residuals, rank deficient)."""
    layout, a, x = recursion.layout, recursion.a, recursion.x
    m, T, P = recursion.max_lag, recursion.n_times, recursion.spec.ar_order
    regressors = [a[m - lag : T - lag] for lag in range(1, P + 1)] + [x[m:]]
    design = np.column_stack(regressors)
    response = a[m:]
    coef, _, rank, _ = np.linalg.lstsq(design, response, rcond=None)
    d = layout.dim
    theta = np.zeros(layout.size)
    ar = np.stack([coef[p * d : (p + 1) * d].T for p in range(P)]) if P else np.zeros((0, d, d))
    theta[layout.ar_slice] = ar.ravel()
    theta[layout.beta_slice] = coef[P * d :].T.ravel()
    residuals = response - design @ coef
    return theta, residuals, bool(rank < design.shape[1])


def fit_tvarma(
    series: CompositionalSeries,
    ar_order: int = 1,
    ma_order: int = 0,
    mean_design: Optional[CovariateSpec] = None,
    parameterization: Parameterization = Parameterization.UNCENTERED,
    ar_mask: MaskSpec = MaskKind.FULL,
    ma_mask: MaskSpec = MaskKind.FULL,
    reference: Optional[int] = None,
    config: Optional[OptimizerConfig] = None,
) -> TvarmaResult:
    """Gaussian conditional MLE of a VARMA(P, Q) on alr(y).

    Degenerate inputs (a constant alr coordinate, rank-deficient regressors,
    singular residual covariance) give ``converged=False`` with the
    ``degenerate_design`` reason instead of an exception.

    Raises:
        UsageError: The series leaves no step after the first max(P, Q)
    """
    spec = tvarma_spec(
        series.n_components,
        ar_order,
        ma_order,
        mean_design,
        parameterization,
        ar_mask,
        ma_mask,
        reference,
    )
    return fit_tvarma_spec(spec, series, config)


def _failed(spec, layout, theta, chol, reasons, config, started) -> TvarmaResult:
    d = layout.dim
    n_chol = d * (d + 1) // 2
    if chol is None:
        chol = np.full(n_chol, np.nan)
        sigma = np.full((d, d), np.nan)
    else:
        lower = cholesky_from_params(chol, d)
        sigma = lower @ lower.T
    logger.warning(f"tVARMA fit failed: {', '.join(reasons)}")
    return TvarmaResult(
        spec=spec,
        names=layout.names,
        estimate=theta,
        covariance=np.full((layout.size, layout.size), np.nan),
        converged=False,
        attempts=max(1, len(reasons)),
        reasons=reasons,
        sigma=sigma,
        cholesky_params=chol,
        cholesky_covariance=np.full((n_chol, n_chol), np.nan),
        degenerate=DEGENERATE_DESIGN in reasons,
        n_paths=config.n_paths,
        elapsed_seconds=time.perf_counter() - started,
    )


def fit_tvarma_spec(
    spec: ModelSpec, series: CompositionalSeries, config: Optional[OptimizerConfig] = None
) -> TvarmaResult:
    """``fit_tvarma`` driven by a ModelSpec (its scale design and link are ignored)."""
    config = config or OptimizerConfig()
    spec = as_tvarma_spec(spec)
    if series.n_times <= spec.max_lag:
        raise UsageError(
            f"series of length {series.n_times} is too short for max(P, Q) = {spec.max_lag}",
            t=spec.max_lag + 1,
        )
    started = time.perf_counter()
    model = GaussianVarmaLikelihood(spec, series)
    layout = model.layout
    d, n_free, n_chol = layout.dim, layout.n_free, model.n_cholesky

    if np.any(np.ptp(model.a, axis=0) == 0.0):
        return _failed(spec, layout, layout.zeros(), None, [DEGENERATE_DESIGN], config, started)

    closed_form = (
        spec.ma_order == 0
        and spec.parameterization is Parameterization.UNCENTERED
        and bool(np.all(spec.ar_mask_matrix()))
    )

    def split(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return layout.expand(x[:n_free]), x[n_free:]

    def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
        theta, chol = split(x)
        try:
            value, grad_theta, grad_chol = model.value_and_grad(theta, chol)
        except (BdarmaError, ArithmeticError, LinAlgError, ValueError):
            return np.inf, np.zeros_like(x)
        if not np.isfinite(value):
            return np.inf, np.zeros_like(x)
        return -value, -np.concatenate([grad_theta[layout.free_index], grad_chol])

    def gradient(x: np.ndarray) -> np.ndarray:
        theta, chol = split(x)
        _, grad_theta, grad_chol = model.value_and_grad(theta, chol)
        return np.concatenate([grad_theta[layout.free_index], grad_chol])

    reasons: List[str] = []
    solution: Optional[np.ndarray] = None
    attempts = 0
    log_likelihood = float("nan")

    if closed_form:
        attempts = 1
        theta, residuals, rank_deficient = _least_squares(model)
        sigma = residuals.T @ residuals / residuals.shape[0]
        try:
            lower = cholesky(sigma, lower=True)
        except LinAlgError:
            rank_deficient = True
        if rank_deficient:
            return _failed(spec, layout, theta, None, [DEGENERATE_DESIGN], config, started)
        solution = np.concatenate([layout.restrict(theta), params_from_cholesky(lower)])
        log_likelihood = -objective(solution)[0]
    else:
        spread = np.maximum(np.std(np.diff(model.a, axis=0), axis=0), 1e-3)
        scale0 = params_from_cholesky(np.diag(spread))
        best = None
        for attempt in range(config.retries + 1):
            attempts = attempt + 1
            rng = keyed_generator(config.seed, attempt)
            x0 = np.concatenate(
                [rng.uniform(-config.init_range, config.init_range, size=n_free), scale0]
            )
            result, reason = bfgs_attempt(objective, x0, config)
            if reason is None:
                solution = result.x
                log_likelihood = float(-result.fun)
                break
            reasons.append(reason)
            if np.isfinite(result.fun) and (best is None or result.fun < best.fun):
                best = result
        if solution is None:
            x = best.x if best is not None else np.concatenate([np.zeros(n_free), scale0])
            theta, chol = split(x)
            return _failed(spec, layout, theta, chol, reasons, config, started)

    try:
        hessian = central_difference_hessian(gradient, solution, config.hessian_step)
        joint_cov = covariance_from_hessian(hessian)
    except (BdarmaError, ArithmeticError, LinAlgError, ValueError):
        joint_cov = None
    theta, chol = split(solution)
    if joint_cov is None:
        reasons.append(HESSIAN_NOT_PD)
        return _failed(spec, layout, theta, chol, reasons, config, started)

    covariance = np.zeros((layout.size, layout.size))
    covariance[np.ix_(layout.free_index, layout.free_index)] = joint_cov[:n_free, :n_free]
    lower = cholesky_from_params(chol, d)
    elapsed = time.perf_counter() - started
    logger.info(
        f"tVARMA fit ({'least squares' if closed_form else 'BFGS'}): "
        f"log-likelihood {log_likelihood:.4f}, {elapsed:.2f}s"
    )
    return TvarmaResult(
        spec=spec,
        names=layout.names,
        estimate=theta,
        covariance=covariance,
        attempts=attempts,
        reasons=reasons,
        log_likelihood=log_likelihood,
        sigma=lower @ lower.T,
        cholesky_params=chol,
        cholesky_covariance=joint_cov[n_free:, n_free:],
        n_paths=config.n_paths,
        elapsed_seconds=elapsed,
    )


class TvarmaEngine(BaseEngine):
    """Fits the Gaussian alr baseline."""

    name = "tvarma"

    def __init__(self, config: Optional[OptimizerConfig] = None):
        self.config = config or OptimizerConfig()

    def fit(self, spec: ModelSpec, series: CompositionalSeries) -> TvarmaResult:
        result = fit_tvarma_spec(spec, series, self.config)
        if not result.converged:
            raise FitFailedError("tVARMA fit did not converge", reasons=result.reasons)
        return result

    def describe(self) -> Dict[str, Any]:
        return {"engine": self.name, **self.config.model_dump()}

