"""Model specification: orders, link, covariate designs, masks and priors.

All types are frozen pydantic models so a spec can be shared read-only by
sampler chains, serialized to a flat config document and hashed into a run
manifest.

Example:
    >>> from bdarma.core.model.spec import ModelSpec, CovariateSpec, FourierTerm
    >>> spec = ModelSpec(
    ...     n_components=12,
    ...     ar_order=1,
    ...     ma_order=0,
    ...     mean_design=CovariateSpec(
    ...         trend="linear",
    ...         fourier=[
    ...             FourierTerm(period=7, harmonics=3),
    ...             FourierTerm(period=365.25, harmonics=9),
    ...         ],
    ...     ),
    ...     ar_mask="nearest_neighbor",
    ... )
"""

from enum import Enum
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from bdarma.core.simplex import Link, LogRatioLink


class Parameterization(str, Enum):
    """Whether the AR term subtracts the regression mean of the lagged step."""

    CENTERED = "centered"
    UNCENTERED = "uncentered"


class MaskKind(str, Enum):
    """Named sparsity patterns for the AR/MA coefficient matrices."""

    FULL = "full"
    NEAREST_NEIGHBOR = "nearest_neighbor"
    DIAGONAL = "diagonal"


class TrendKind(str, Enum):
    NONE = "none"
    LINEAR = "linear"


class FourierTerm(BaseModel):
    """K harmonic (sin, cos) pairs of a season with the given period."""

    model_config = ConfigDict(frozen=True)

    period: float = Field(..., gt=0, description="Season length w in time steps (7, 365.25)")
    harmonics: int = Field(..., ge=1, description="Number of harmonic pairs K")

    @model_validator(mode="after")
    def _check_harmonics(self) -> "FourierTerm":
        if self.harmonics > self.period / 2:
            raise ValueError(
                f"harmonics={self.harmonics} exceeds period/2 for period {self.period}"
            )
        return self


class CovariateSpec(BaseModel):
    """Deterministic covariate row x_t = [1?, t/T_train?, sin/cos pairs]."""

    model_config = ConfigDict(frozen=True)

    intercept: bool = Field(True, description="Include an intercept column")
    trend: TrendKind = Field(TrendKind.NONE, description="Linear trend on the t/T_train scale")
    fourier: List[FourierTerm] = Field(default_factory=list, description="Seasonal Fourier blocks")

    @property
    def n_columns(self) -> int:
        return (
            int(self.intercept)
            + int(self.trend is TrendKind.LINEAR)
            + sum(2 * term.harmonics for term in self.fourier)
        )

    @property
    def is_empty(self) -> bool:
        return self.n_columns == 0

    @property
    def column_names(self) -> List[str]:
        names: List[str] = []
        if self.intercept:
            names.append("intercept")
        if self.trend is TrendKind.LINEAR:
            names.append("trend")
        for term in self.fourier:
            period = f"{term.period:g}"
            for k in range(1, term.harmonics + 1):
                names.append(f"sin{period}_{k}")
                names.append(f"cos{period}_{k}")
        return names

    @property
    def column_kinds(self) -> List[str]:
        """'intercept', 'trend' or 'fourier' for every column."""
        kinds: List[str] = []
        if self.intercept:
            kinds.append("intercept")
        if self.trend is TrendKind.LINEAR:
            kinds.append("trend")
        for term in self.fourier:
            kinds.extend(["fourier"] * (2 * term.harmonics))
        return kinds


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------


class NormalPrior(BaseModel):
    """Independent N(mean, sd^2) on every free coefficient of the block."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["normal"] = "normal"
    mean: float = 0.0
    sd: float = Field(0.5, gt=0)


class BandedNormalPrior(BaseModel):
    """Normal prior whose mean depends on the band |r - s| of an AR entry."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["banded_normal"] = "banded_normal"
    diagonal_mean: float = 0.4
    neighbor_mean: float = 0.1
    other_mean: float = 0.0
    sd: float = Field(0.5, gt=0)


class DesignNormalPrior(BaseModel):
    """Normal prior with separate sds for intercept, trend and Fourier columns."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["design_normal"] = "design_normal"
    intercept_mean: float = 0.0
    intercept_sd: float = Field(2.0, gt=0)
    trend_sd: float = Field(0.1, gt=0)
    fourier_sd: float = Field(1.0, gt=0)


class GammaInterceptPrior(BaseModel):
    """Gamma(shape, rate) on the scale intercept; normal on the other scale columns.

    The defaults give mean 5 and variance 7 for log(phi).
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["gamma_intercept"] = "gamma_intercept"
    shape: float = Field(25.0 / 7.0, gt=0)
    rate: float = Field(5.0 / 7.0, gt=0)
    trend_sd: float = Field(0.1, gt=0)
    fourier_sd: float = Field(1.0, gt=0)


class HorseshoePrior(BaseModel):
    """theta_c ~ N(0, tau^2 lambda_g^2), lambda_g ~ C+(0, 1), tau fixed.

    Groups: one lambda per eta component (row r of every A_p, B_q and the
    beta coefficients of eta_r) and one lambda for the scale block.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["horseshoe"] = "horseshoe"
    tau: float = Field(1.0, gt=0)


ArPrior = Union[NormalPrior, BandedNormalPrior, HorseshoePrior]
MaPrior = Union[NormalPrior, HorseshoePrior]
BetaPrior = Union[NormalPrior, DesignNormalPrior, HorseshoePrior]
GammaPrior = Union[NormalPrior, DesignNormalPrior, GammaInterceptPrior, HorseshoePrior]


class PriorConfig(BaseModel):
    """Per-block prior choice. Defaults: N(0, 0.5^2) on A, B, beta; Gamma(25/7, 5/7) on log phi."""

    model_config = ConfigDict(frozen=True)

    ar: ArPrior = Field(default_factory=NormalPrior, discriminator="kind")
    ma: MaPrior = Field(default_factory=NormalPrior, discriminator="kind")
    beta: BetaPrior = Field(default_factory=NormalPrior, discriminator="kind")
    gamma: GammaPrior = Field(default_factory=GammaInterceptPrior, discriminator="kind")

    @property
    def uses_horseshoe(self) -> bool:
        return any(
            isinstance(block, HorseshoePrior) for block in (self.ar, self.ma, self.beta, self.gamma)
        )


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------

MaskSpec = Union[MaskKind, List[List[bool]]]


def mask_matrix(mask: MaskSpec, dim: int) -> np.ndarray:
    """Boolean (dim, dim) matrix, True where the coefficient is free."""
    if isinstance(mask, MaskKind) or isinstance(mask, str):
        kind = MaskKind(mask)
        offset = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim)))
        if kind is MaskKind.FULL:
            return np.ones((dim, dim), dtype=bool)
        if kind is MaskKind.NEAREST_NEIGHBOR:
            return offset <= 1
        return offset == 0
    return np.asarray(mask, dtype=bool)


def count_free(mask: MaskSpec, dim: int) -> int:
    """Number of free entries a mask leaves in one coefficient matrix."""
    return int(mask_matrix(mask, dim).sum())


class ModelSpec(BaseModel):
    """A (B-)DARMA(P, Q) model for J-component compositions."""

    model_config = ConfigDict(frozen=True)

    n_components: int = Field(..., ge=2, description="Number of components J")
    ar_order: int = Field(1, ge=0, description="VAR order P")
    ma_order: int = Field(0, ge=0, description="VMA order Q")
    link: Link = Field(Link.ALR, description="Log-ratio link")
    reference: Optional[int] = Field(
        None, ge=1, description="1-based reference component (default J)"
    )
    parameterization: Parameterization = Field(Parameterization.CENTERED)
    mean_design: CovariateSpec = Field(default_factory=CovariateSpec)
    scale_design: Optional[CovariateSpec] = Field(
        None, description="Design z_t for log(phi_t); defaults to the mean design"
    )
    ar_mask: MaskSpec = Field(MaskKind.FULL)
    ma_mask: MaskSpec = Field(MaskKind.FULL)
    prior: PriorConfig = Field(default_factory=PriorConfig)

    @field_validator("ar_mask", "ma_mask", mode="before")
    @classmethod
    def _coerce_mask(cls, value: object) -> object:
        if isinstance(value, str):
            return MaskKind(value)
        return value

    @model_validator(mode="after")
    def _check(self) -> "ModelSpec":
        if self.reference is not None and self.reference > self.n_components:
            raise ValueError(f"reference {self.reference} outside 1..{self.n_components}")
        if self.ar_order + self.ma_order < 1 and self.mean_design.is_empty:
            raise ValueError("need P + Q >= 1 or a non-empty mean design")
        for name in ("ar_mask", "ma_mask"):
            mask = getattr(self, name)
            if not isinstance(mask, MaskKind):
                shape = np.asarray(mask, dtype=bool).shape
                if shape != (self.dim, self.dim):
                    raise ValueError(f"{name} has shape {shape}, expected ({self.dim}, {self.dim})")
        needs_intercept = isinstance(self.prior.gamma, GammaInterceptPrior)
        if needs_intercept and not self.resolved_scale_design.intercept:
            raise ValueError("gamma_intercept prior needs an intercept in the scale design")
        if isinstance(self.prior.ar, BandedNormalPrior) and self.ar_order == 0:
            raise ValueError("banded_normal prior given for an AR block of order 0")
        return self

    @property
    def dim(self) -> int:
        """Dimension of the linear predictor, J - 1."""
        return self.n_components - 1

    @property
    def max_lag(self) -> int:
        """m = max(P, Q): observations conditioned on."""
        return max(self.ar_order, self.ma_order)

    @property
    def reference_index(self) -> int:
        return self.n_components if self.reference is None else self.reference

    @property
    def resolved_scale_design(self) -> CovariateSpec:
        return self.mean_design if self.scale_design is None else self.scale_design

    def ar_mask_matrix(self) -> np.ndarray:
        return mask_matrix(self.ar_mask, self.dim)

    def ma_mask_matrix(self) -> np.ndarray:
        return mask_matrix(self.ma_mask, self.dim)

    def link_map(self) -> LogRatioLink:
        return LogRatioLink(self.link, self.n_components, self.reference_index)

    @property
    def n_parameters(self) -> int:
        """C = (P + Q)(J - 1)^2 + r_beta + r_gamma (masked entries included)."""
        return (
            (self.ar_order + self.ma_order) * self.dim**2
            + self.dim * self.mean_design.n_columns
            + self.resolved_scale_design.n_columns
        )


def free_parameter_difference(n_components: int, wider: MaskSpec, narrower: MaskSpec) -> int:
    """How many more free entries ``wider`` leaves in one A matrix than ``narrower``."""
    dim = n_components - 1
    return count_free(wider, dim) - count_free(narrower, dim)
