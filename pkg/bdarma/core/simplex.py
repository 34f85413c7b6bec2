"""Simplex data types, log-ratio transforms and the Dirichlet distribution.

Transforms accept either the typed wrappers (``Composition``,
``LogRatioVector``) or plain arrays whose last axis is the component axis.
Typed inputs give typed outputs; array inputs give arrays, vectorized over
any leading axes. Reference indices are 1-based and default to the last
component.

Example:
    >>> from bdarma.core.simplex import Composition, alr, alr_inv
    >>> y = Composition(values=(0.5, 0.25, 0.25))
    >>> eta = alr(y)              # LogRatioVector(values=(0.693..., 0.0), reference=3)
    >>> alr_inv(eta).values       # (0.5, 0.25, 0.25)
"""

import logging
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import digamma, gammaln, softmax

from bdarma.exceptions import DomainError

logger = logging.getLogger(__name__)

COMPOSITION_TOL = 1e-10
TINY = np.finfo(float).tiny


class Composition(BaseModel):
    """A strictly positive J-vector summing to one (one observation y_t)."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...] = Field(..., description="Proportions, each in (0, 1)")

    @field_validator("values")
    @classmethod
    def _check_simplex(cls, values: Tuple[float, ...]) -> Tuple[float, ...]:
        validate_composition(np.asarray(values, dtype=float))
        return values

    @property
    def n_components(self) -> int:
        return len(self.values)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class LogRatioVector(BaseModel):
    """J-1 unconstrained log-ratio coordinates relative to a reference component."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[float, ...] = Field(..., description="Log-ratio coordinates")
    reference: int = Field(..., ge=1, description="1-based reference component j*")

    @model_validator(mode="after")
    def _check(self) -> "LogRatioVector":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("log-ratio coordinates must be finite")
        if self.reference > len(self.values) + 1:
            raise ValueError(
                f"reference {self.reference} outside 1..{len(self.values) + 1}"
            )
        return self

    def to_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class DirichletParams(BaseModel):
    """Mean/scale parameterization of the Dirichlet: alpha = scale * mean."""

    model_config = ConfigDict(frozen=True)

    mean: Composition = Field(..., description="Mean vector mu_t")
    scale: float = Field(..., gt=0, description="Concentration phi_t")

    @property
    def alpha(self) -> np.ndarray:
        return self.scale * self.mean.to_array()

    @classmethod
    def from_alpha(cls, alpha: "np.ndarray | Tuple[float, ...]") -> "DirichletParams":
        a = np.asarray(alpha, dtype=float)
        total = float(a.sum())
        return cls(mean=Composition(values=tuple(a / total)), scale=total)


ArrayOrComposition = Union[Composition, np.ndarray, Tuple[float, ...], list]


def _as_array(y: ArrayOrComposition) -> np.ndarray:
    if isinstance(y, (Composition, LogRatioVector)):
        return y.to_array()
    return np.asarray(y, dtype=float)


def _resolve_reference(reference: Optional[int], n_components: int) -> int:
    ref = n_components if reference is None else int(reference)
    if not 1 <= ref <= n_components:
        raise DomainError(f"reference {ref} outside 1..{n_components}", index=ref)
    return ref


def check_positive(y: np.ndarray) -> None:
    """Raise ``DomainError`` naming the first non-positive component."""
    bad = ~(y > 0)
    if np.any(bad):
        component = int(np.argwhere(bad)[0][-1]) + 1
        raise DomainError(f"component {component} is not strictly positive", index=component)


def validate_composition(y: np.ndarray, tol: float = COMPOSITION_TOL) -> None:
    """Check the Composition invariants on every row of ``y``."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] < 2:
        raise DomainError("a composition needs at least two components")
    check_positive(y)
    sums = y.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise DomainError(f"components sum to {np.ravel(sums)[0]!r}, not 1")


def closure(x: np.ndarray) -> np.ndarray:
    """Rescale positive vectors so the last axis sums to one."""
    x = np.asarray(x, dtype=float)
    return x / x.sum(axis=-1, keepdims=True)


def replace_zeros(y: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Replace non-positive components by ``eps`` and renormalize."""
    y = np.asarray(y, dtype=float)
    return closure(np.where(y > 0, y, eps))


# ---------------------------------------------------------------------------
# Log-ratio transforms
# ---------------------------------------------------------------------------


def alr(
    y: ArrayOrComposition, reference: Optional[int] = None
) -> Union[LogRatioVector, np.ndarray]:
    """Additive log ratio: log(y_j / y_ref) for j != ref, in component order."""
    arr = _as_array(y)
    ref = _resolve_reference(reference, arr.shape[-1])
    check_positive(arr)
    log_y = np.log(arr)
    out = np.delete(log_y, ref - 1, axis=-1) - log_y[..., ref - 1 : ref]
    if isinstance(y, Composition):
        return LogRatioVector(values=tuple(out.tolist()), reference=ref)
    return out


def alr_inv(
    eta: Union[LogRatioVector, np.ndarray, Tuple[float, ...], list], reference: Optional[int] = None
) -> Union[Composition, np.ndarray]:
    """Inverse alr: softmax with an implicit zero in the reference slot."""
    if isinstance(eta, LogRatioVector):
        reference = eta.reference if reference is None else reference
    arr = _as_array(eta)
    ref = _resolve_reference(reference, arr.shape[-1] + 1)
    full = np.insert(arr, ref - 1, 0.0, axis=-1)
    mu = softmax(full, axis=-1)
    if isinstance(eta, LogRatioVector):
        return Composition(values=tuple(mu.tolist()))
    return mu


def clr(y: ArrayOrComposition) -> np.ndarray:
    """Centered log ratio: log(y_j / g(y)) with g the geometric mean."""
    arr = _as_array(y)
    check_positive(arr)
    log_y = np.log(arr)
    return log_y - log_y.mean(axis=-1, keepdims=True)


def clr_inv(z: np.ndarray) -> np.ndarray:
    """Inverse clr (softmax)."""
    return softmax(np.asarray(z, dtype=float), axis=-1)


def pivot_basis(n_components: int) -> np.ndarray:
    """Orthonormal pivot contrast matrix, shape (J-1, J).

    Row j contrasts component j against the geometric mean of components
    j+1..J: entry j is sqrt(r/(r+1)) and the following r entries are
    -sqrt(r/(r+1))/r, with r = J - j.
    """
    basis = np.zeros((n_components - 1, n_components))
    for j in range(n_components - 1):
        r = n_components - 1 - j
        weight = np.sqrt(r / (r + 1.0))
        basis[j, j] = weight
        basis[j, j + 1 :] = -weight / r
    return basis


def ilr(y: ArrayOrComposition) -> np.ndarray:
    """Isometric log ratio over the default pivot partition."""
    arr = _as_array(y)
    check_positive(arr)
    return np.log(arr) @ pivot_basis(arr.shape[-1]).T


def ilr_inv(z: np.ndarray) -> np.ndarray:
    """Inverse of ``ilr`` for the pivot partition."""
    z = np.asarray(z, dtype=float)
    return softmax(z @ pivot_basis(z.shape[-1] + 1), axis=-1)


class Link(str, Enum):
    """Log-ratio link between the mean mu_t and the linear predictor eta_t."""

    ALR = "alr"
    CLR = "clr"
    ILR = "ilr"


class LogRatioLink:
    """A log-ratio link written as a linear map of log(mu).

    ``forward(y) = log(y) @ contrast.T`` maps J components to J-1 coordinates
    (rows of ``contrast`` sum to zero), and ``inverse(eta) = softmax(eta @
    embed.T)`` maps back, with ``contrast @ embed = I``.

    - ALR: contrast rows e_j - e_ref; embed inserts a zero at the reference.
    - CLR: centered log ratio with the reference coordinate dropped; embed
      restores it as minus the sum of the others.
    - ILR: the pivot basis and its transpose.
    """

    def __init__(self, kind: Link, n_components: int, reference: Optional[int] = None):
        self.kind = Link(kind)
        self.n_components = n_components
        self.reference = _resolve_reference(reference, n_components)
        d = n_components - 1
        keep = [j for j in range(n_components) if j != self.reference - 1]

        if self.kind is Link.ALR:
            contrast = np.eye(n_components)[keep]
            contrast[:, self.reference - 1] = -1.0
            embed = np.zeros((n_components, d))
            embed[keep, :] = np.eye(d)
        elif self.kind is Link.CLR:
            centering = np.eye(n_components) - 1.0 / n_components
            contrast = centering[keep]
            embed = np.zeros((n_components, d))
            embed[keep, :] = np.eye(d)
            embed[self.reference - 1, :] = -1.0
        else:
            contrast = pivot_basis(n_components)
            embed = contrast.T.copy()

        self.contrast = contrast
        self.embed = embed

    @property
    def dim(self) -> int:
        return self.n_components - 1

    def forward(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        check_positive(y)
        return np.log(y) @ self.contrast.T

    def inverse(self, eta: np.ndarray) -> np.ndarray:
        return softmax(np.asarray(eta, dtype=float) @ self.embed.T, axis=-1)

    def pullback(self, mu: np.ndarray, grad_mu: np.ndarray) -> np.ndarray:
        """Chain a gradient with respect to mu back to eta."""
        centered = grad_mu - np.sum(mu * grad_mu, axis=-1, keepdims=True)
        return (mu * centered) @ self.embed

    def __repr__(self) -> str:
        return (
            f"LogRatioLink(kind={self.kind.value}, J={self.n_components}, "
            f"reference={self.reference})"
        )


# ---------------------------------------------------------------------------
# Dirichlet distribution
# ---------------------------------------------------------------------------


def dirichlet_logpdf_array(y: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Vectorized exact Dirichlet log density under the mean/scale parameterization."""
    scale = np.asarray(scale, dtype=float)
    alpha = scale[..., None] * mean
    return (
        gammaln(scale)
        - np.sum(gammaln(alpha), axis=-1)
        + np.sum((alpha - 1.0) * np.log(y), axis=-1)
    )


def dirichlet_score_array(
    y: np.ndarray, mean: np.ndarray, scale: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of the log density with respect to mean (scale fixed) and log scale."""
    scale = np.asarray(scale, dtype=float)
    alpha = scale[..., None] * mean
    residual = np.log(y) - digamma(alpha)
    grad_mean = scale[..., None] * residual
    grad_log_scale = scale * (digamma(scale) + np.sum(mean * residual, axis=-1))
    return grad_mean, grad_log_scale


def dirichlet_logpdf(y: ArrayOrComposition, params: DirichletParams) -> float:
    """Exact Dirichlet log density including the normalizing constant."""
    arr = _as_array(y)
    return float(dirichlet_logpdf_array(arr, params.mean.to_array(), np.float64(params.scale)))


def dirichlet_logpdf_grad(
    y: ArrayOrComposition, params: DirichletParams, link: Optional[LogRatioLink] = None
) -> Tuple[np.ndarray, float]:
    """Gradient of ``dirichlet_logpdf`` with respect to (eta, log scale).

    Args:
        y: Observation
        params: Dirichlet mean/scale
        link: Link defining eta = link(mean); ALR with reference J by default

    Returns:
        (gradient over the J-1 link coordinates, derivative with respect to log scale)
    """
    arr = _as_array(y)
    mean = params.mean.to_array()
    link = link or LogRatioLink(Link.ALR, arr.shape[-1])
    grad_mean, grad_log_scale = dirichlet_score_array(arr, mean, np.float64(params.scale))
    return link.pullback(mean, grad_mean), float(grad_log_scale)


def dirichlet_sample_array(alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw Dirichlet(alpha) rows by normalizing Gamma variates.

    Shapes below one are boosted: G(a) = G(a + 1) * U^(1/a), evaluated on the
    log scale so small shapes cannot underflow before normalization.
    """
    alpha = np.asarray(alpha, dtype=float)
    small = alpha < 1.0
    gamma = rng.standard_gamma(np.where(small, alpha + 1.0, alpha))
    uniform = rng.uniform(size=alpha.shape)
    log_g = np.log(np.maximum(gamma, TINY)) + np.where(small, np.log(uniform) / alpha, 0.0)
    y = softmax(log_g, axis=-1)
    return closure(np.maximum(y, TINY))


def dirichlet_sample(params: DirichletParams, rng: np.random.Generator) -> Composition:
    """One draw from Dirichlet(scale * mean)."""
    draw = dirichlet_sample_array(params.alpha, rng)
    # renormalize in case rounding left the sum a few ulps from one
    return Composition(values=tuple(closure(draw).tolist()))
