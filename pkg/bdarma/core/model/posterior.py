"""Unnormalized log posterior on the unconstrained sampling space.

The sampling vector is ``u = [free theta slots, log lambda_1..log lambda_G]``.
When the scale intercept carries a Gamma prior its slot holds log(gamma_0)
instead of gamma_0. Log-Jacobian terms of both transforms are included, so
the density is the posterior of u.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from bdarma.core.model.layout import ParamLayout, ParamVector, as_theta
from bdarma.core.model.likelihood import DarmaLikelihood
from bdarma.core.model.prior import CompiledPrior
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec, Parameterization
from bdarma.exceptions import NonFiniteError, UsageError

logger = logging.getLogger(__name__)


class LogPosterior:
    """log p(u | y) up to a constant, with its gradient."""

    def __init__(self, spec: ModelSpec, series: CompositionalSeries):
        self.spec = spec
        self.likelihood = DarmaLikelihood(spec, series)
        self.layout: ParamLayout = self.likelihood.layout
        self.prior = CompiledPrior(spec, self.layout)
        self.n_free = self.layout.n_free
        self.n_local_scales = self.prior.n_local_scales
        self.dim = self.n_free + self.n_local_scales

        self.log_slot: Optional[int] = None
        if self.prior.gamma_intercept is not None:
            self.log_slot = int(np.searchsorted(self.layout.free_index, self.prior.gamma_intercept))

    @property
    def names(self) -> List[str]:
        names = list(self.layout.free_names)
        if self.log_slot is not None:
            names[self.log_slot] = f"log({names[self.log_slot]})"
        names.extend(f"log(lambda[{label}])" for label in self.local_scale_names)
        return names

    @property
    def local_scale_names(self) -> List[str]:
        d = self.layout.dim
        return [str(g + 1) if g < d else "phi" for g in self.prior.group_ids]

    def constrain(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Map u to (full theta, local scales); works on (..., dim) arrays."""
        u = np.asarray(u, dtype=float)
        free = u[..., : self.n_free].copy()
        if self.log_slot is not None:
            free[..., self.log_slot] = np.exp(free[..., self.log_slot])
        theta = np.zeros(u.shape[:-1] + (self.layout.size,))
        theta[..., self.layout.free_index] = free
        return theta, np.exp(u[..., self.n_free :])

    def unconstrain(
        self, theta: np.ndarray, local_scales: Optional[np.ndarray] = None
    ) -> np.ndarray:
        free = self.layout.restrict(theta).copy()
        if self.log_slot is not None:
            free[self.log_slot] = np.log(free[self.log_slot])
        if self.n_local_scales:
            lam = np.ones(self.n_local_scales) if local_scales is None else np.asarray(local_scales)
            return np.concatenate([free, np.log(lam)])
        return free

    def value_and_grad(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
        """Log posterior of u and its gradient.

        Raises:
            NonFiniteError: Any term evaluates to a non-finite value
        """
        u = np.asarray(u, dtype=float)
        theta, lam = self.constrain(u)

        ll, grad_ll = self.likelihood.value_and_grad(theta)
        lp, grad_prior, grad_lambda = self.prior.value_and_grad(
            theta, lam if self.n_local_scales else None
        )
        if not np.isfinite(lp):
            raise NonFiniteError("log prior is not finite", term="prior")

        grad_theta = (grad_ll + grad_prior)[self.layout.free_index]
        jacobian = 0.0
        if self.log_slot is not None:
            jacobian += u[self.log_slot]
            intercept = theta[self.prior.gamma_intercept]
            grad_theta[self.log_slot] = grad_theta[self.log_slot] * intercept + 1.0
        if self.n_local_scales:
            log_lam = u[self.n_free :]
            jacobian += float(np.sum(log_lam))
            grad_u_lambda = grad_lambda * lam + 1.0
            grad = np.concatenate([grad_theta, grad_u_lambda])
        else:
            grad = grad_theta

        value = ll + lp + jacobian
        if not np.isfinite(value):
            raise NonFiniteError("log-Jacobian is not finite", term="jacobian")
        return float(value), grad

    def __call__(self, u: np.ndarray) -> float:
        return self.value_and_grad(u)[0]


def log_posterior_and_grad(
    spec: ModelSpec, theta_unconstrained: np.ndarray, series: CompositionalSeries
) -> Tuple[float, np.ndarray]:
    """log p(theta | y) + log|Jacobian| and its gradient on the sampling space."""
    return LogPosterior(spec, series).value_and_grad(theta_unconstrained)


def center_to_uncentered(
    spec: ModelSpec, theta: "np.ndarray | ParamVector"
) -> Tuple[ModelSpec, np.ndarray]:
    """Rewrite a centered model with a time-invariant mean design as its uncentered twin.

    With X_t constant, A(a_{t-1} - beta) + beta = A a_{t-1} + (I - sum_p A_p) beta,
    so beta* = beta - sum_p A_p beta gives identical eta paths.

    Raises:
        UsageError: The model is not centered or its mean design varies with t
    """
    if spec.parameterization is not Parameterization.CENTERED:
        raise UsageError("model is already uncentered")
    design = spec.mean_design
    if design.n_columns != int(design.intercept) or not design.intercept:
        raise UsageError("only an intercept-only mean design has an uncentered equivalent")
    layout = ParamLayout(spec)
    vector = as_theta(layout, theta).copy()
    ar, _, beta, _ = layout.split(vector)
    intercept = beta[:, 0]
    shifted = intercept - ar.sum(axis=0) @ intercept
    vector[layout.beta_slice] = shifted
    return spec.model_copy(update={"parameterization": Parameterization.UNCENTERED}), vector

