"""Log prior densities over the free parameter slots.

Masked AR/MA slots are fixed at zero and carry no prior mass. Horseshoe
blocks contribute N(0, tau^2 lambda_g^2) terms plus a half-Cauchy density
for every local scale lambda_g that some coordinate uses.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import gammaln

from bdarma.core.model.layout import ParamLayout, ParamVector, as_theta
from bdarma.core.model.spec import (
    BandedNormalPrior,
    DesignNormalPrior,
    GammaInterceptPrior,
    HorseshoePrior,
    ModelSpec,
    NormalPrior,
)
from bdarma.exceptions import DomainError, UsageError

logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
LOG_2_OVER_PI = np.log(2.0 / np.pi)


class CompiledPrior:
    """Per-slot prior tables for one spec, evaluated with gradients.

    Attributes:
        normal_index: Slots with a fixed normal prior
        normal_mean, normal_sd: Their parameters
        horseshoe_index: Slots under a horseshoe
        horseshoe_tau: Global scale of each horseshoe slot
        horseshoe_group: Position of each horseshoe slot's lambda in the local-scale vector
        gamma_intercept: Slot of the Gamma-prior scale intercept, or None
        n_local_scales: Length of the local-scale vector
    """

    def __init__(self, spec: ModelSpec, layout: Optional[ParamLayout] = None):
        self.spec = spec
        self.layout = layout or ParamLayout(spec)
        self.gamma_intercept: Optional[int] = None
        self.gamma_shape = 0.0
        self.gamma_rate = 0.0

        mean = np.zeros(self.layout.size)
        sd = np.ones(self.layout.size)
        tau = np.zeros(self.layout.size)
        horseshoe = np.zeros(self.layout.size, dtype=bool)

        self._fill_ar(mean, sd, tau, horseshoe)
        self._fill_block(self.spec.prior.ma, self.layout.ma_slice, None, mean, sd, tau, horseshoe)
        self._fill_block(
            self.spec.prior.beta,
            self.layout.beta_slice,
            np.tile(self.spec.mean_design.column_kinds, self.layout.dim),
            mean,
            sd,
            tau,
            horseshoe,
        )
        self._fill_block(
            self.spec.prior.gamma,
            self.layout.gamma_slice,
            np.array(self.spec.resolved_scale_design.column_kinds, dtype=object),
            mean,
            sd,
            tau,
            horseshoe,
        )

        free = self.layout.free
        normal = free & ~horseshoe
        if self.gamma_intercept is not None:
            normal[self.gamma_intercept] = False
        self.normal_index = np.flatnonzero(normal)
        self.normal_mean = mean[self.normal_index]
        self.normal_sd = sd[self.normal_index]

        self.horseshoe_index = np.flatnonzero(free & horseshoe)
        self.horseshoe_tau = tau[self.horseshoe_index]
        groups = self.layout.row_groups[self.horseshoe_index]
        self.group_ids, self.horseshoe_group = np.unique(groups, return_inverse=True)
        self.n_local_scales = int(self.group_ids.size)

    def _fill_ar(self, mean, sd, tau, horseshoe) -> None:
        block = self.spec.prior.ar
        if isinstance(block, BandedNormalPrior):
            d = self.layout.dim
            band = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
            off_diagonal = np.where(band == 1, block.neighbor_mean, block.other_mean)
            table = np.where(band == 0, block.diagonal_mean, off_diagonal)
            mean[self.layout.ar_slice] = np.tile(table.ravel(), self.layout.ar_order)
            sd[self.layout.ar_slice] = block.sd
            return
        self._fill_block(block, self.layout.ar_slice, None, mean, sd, tau, horseshoe)

    def _fill_block(self, block, where: slice, kinds, mean, sd, tau, horseshoe) -> None:
        if where.stop == where.start:
            return
        if isinstance(block, NormalPrior):
            mean[where] = block.mean
            sd[where] = block.sd
        elif isinstance(block, HorseshoePrior):
            horseshoe[where] = True
            tau[where] = block.tau
        elif isinstance(block, DesignNormalPrior):
            kinds = np.asarray(kinds)
            mean[where] = np.where(kinds == "intercept", block.intercept_mean, 0.0)
            sd[where] = np.select(
                [kinds == "intercept", kinds == "trend"],
                [block.intercept_sd, block.trend_sd],
                block.fourier_sd,
            )
        elif isinstance(block, GammaInterceptPrior):
            kinds = np.asarray(kinds)
            mean[where] = 0.0
            sd[where] = np.where(kinds == "trend", block.trend_sd, block.fourier_sd)
            self.gamma_intercept = where.start + int(np.flatnonzero(kinds == "intercept")[0])
            self.gamma_shape = block.shape
            self.gamma_rate = block.rate
        else:
            raise UsageError(f"unsupported prior block {block!r}")

    def value_and_grad(
        self, theta: np.ndarray, local_scales: Optional[np.ndarray] = None
    ) -> Tuple[float, np.ndarray, np.ndarray]:
        """Log prior with gradients.

        Args:
            theta: Full parameter vector
            local_scales: Horseshoe lambdas (length ``n_local_scales``)

        Returns:
            (log prior, gradient over theta, gradient over the lambdas)

        Raises:
            UsageError: Local scales missing or of the wrong length
            DomainError: A local scale or the Gamma-prior intercept is not positive
        """
        theta = np.asarray(theta, dtype=float)
        grad = np.zeros_like(theta)

        z = (theta[self.normal_index] - self.normal_mean) / self.normal_sd
        value = float(np.sum(-0.5 * z**2 - np.log(self.normal_sd)) - LOG_SQRT_2PI * z.size)
        grad[self.normal_index] = -z / self.normal_sd

        if self.gamma_intercept is not None:
            g0 = theta[self.gamma_intercept]
            if not g0 > 0:
                raise DomainError(
                    f"scale intercept {g0!r} must be positive under a Gamma prior",
                    index=self.gamma_intercept + 1,
                )
            k, rate = self.gamma_shape, self.gamma_rate
            value += k * np.log(rate) - gammaln(k) + (k - 1.0) * np.log(g0) - rate * g0
            grad[self.gamma_intercept] = (k - 1.0) / g0 - rate

        grad_lambda = np.zeros(self.n_local_scales)
        if self.n_local_scales:
            if local_scales is None:
                raise UsageError("horseshoe blocks need local scales")
            lam = np.asarray(local_scales, dtype=float)
            if lam.shape != (self.n_local_scales,):
                raise UsageError(f"expected {self.n_local_scales} local scales, got {lam.shape}")
            if np.any(~(lam > 0)):
                bad = int(np.flatnonzero(~(lam > 0))[0]) + 1
                raise DomainError(f"local scale {bad} is not positive", index=bad)
            scale = self.horseshoe_tau * lam[self.horseshoe_group]
            coef = theta[self.horseshoe_index]
            ratio = coef / scale
            value += float(np.sum(-0.5 * ratio**2 - np.log(scale)) - LOG_SQRT_2PI * coef.size)
            grad[self.horseshoe_index] = -ratio / scale
            # d/dlambda of -theta^2 / (2 tau^2 lambda^2) - log lambda
            per_slot = (ratio**2 - 1.0) / lam[self.horseshoe_group]
            grad_lambda += np.bincount(
                self.horseshoe_group, weights=per_slot, minlength=self.n_local_scales
            )
            value += float(np.sum(LOG_2_OVER_PI - np.log1p(lam**2)))
            grad_lambda -= 2.0 * lam / (1.0 + lam**2)
        elif local_scales is not None and np.size(local_scales):
            raise UsageError("local scales given but no block uses a horseshoe prior")

        return value, grad, grad_lambda


def log_prior(
    spec: ModelSpec,
    theta: "np.ndarray | ParamVector",
    local_scales: Optional[np.ndarray] = None,
) -> float:
    """Sum of the block log priors at theta (and the horseshoe local scales).

    Example:
        A 2-component, AR(1) spec with N(0, 1) everywhere evaluated at zero
        gives -0.5 * log(2 pi) per free slot.
    """
    layout = ParamLayout(spec)
    value, _, _ = CompiledPrior(spec, layout).value_and_grad(as_theta(layout, theta), local_scales)
    return value
