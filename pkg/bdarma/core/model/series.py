"""Observed compositional time series."""

import logging
from datetime import date, timedelta
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from bdarma.core.model.design import design_matrix
from bdarma.core.model.spec import ModelSpec
from bdarma.core.simplex import COMPOSITION_TOL, closure, replace_zeros
from bdarma.exceptions import DataError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_EPOCH = date(2015, 1, 1)


class CompositionalSeries(BaseModel):
    """T consecutive compositions y_1..y_T plus the time bookkeeping for covariates.

    Attributes:
        observations: Array (T, J), every row a composition
        trend_scale: Divisor of the trend column (T_train of the run)
        epoch: Calendar date of time index 1, used only for CSV date columns
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    observations: np.ndarray
    trend_scale: float = Field(..., gt=0)
    epoch: date = DEFAULT_EPOCH

    @field_validator("observations", mode="before")
    @classmethod
    def _as_float_array(cls, value: object) -> np.ndarray:
        arr = np.array(value, dtype=float)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check(self) -> "CompositionalSeries":
        y = self.observations
        if y.ndim != 2 or y.shape[1] < 2:
            raise ValueError(f"observations must be (T, J) with J >= 2, got shape {y.shape}")
        nonpositive = np.argwhere(~(y > 0))
        if nonpositive.size:
            row, col = nonpositive[0]
            raise ValueError(f"row {row + 1}: component {col + 1} is not strictly positive")
        off = np.flatnonzero(np.abs(y.sum(axis=1) - 1.0) > COMPOSITION_TOL)
        if off.size:
            raise ValueError(f"row {off[0] + 1}: components do not sum to 1")
        return self

    @classmethod
    def from_array(
        cls,
        values: np.ndarray,
        trend_scale: Optional[float] = None,
        epoch: date = DEFAULT_EPOCH,
        zero_policy: str = "reject",
        epsilon: float = 1e-6,
        sum_tolerance: float = 1e-6,
    ) -> "CompositionalSeries":
        """Build a series from raw shares.

        Args:
            values: Array (T, J) of shares
            trend_scale: Trend divisor; defaults to T
            epoch: Date of the first row
            zero_policy: "reject" raises on zeros, "epsilon" replaces them by ``epsilon``
            epsilon: Replacement value for non-positive shares
            sum_tolerance: Rows whose sum is within this of one are renormalized

        Raises:
            DataError: A row holds a non-positive share (under "reject") or
                does not sum to one
        """
        y = np.asarray(values, dtype=float)
        if y.ndim != 2:
            raise DataError(f"expected a (T, J) table, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            row = int(np.argwhere(~np.isfinite(y))[0][0]) + 1
            raise DataError("non-finite share", row=row)
        if zero_policy == "epsilon":
            replaced = int(np.sum(~(y > 0)))
            if replaced:
                logger.warning(f"Replacing {replaced} non-positive shares by {epsilon:g}")
                y = replace_zeros(y, epsilon)
        elif zero_policy != "reject":
            raise UsageError(f"unknown zero policy {zero_policy!r}")
        else:
            bad = np.argwhere(~(y > 0))
            if bad.size:
                raise DataError(
                    f"component {bad[0][1] + 1} is not strictly positive "
                    "(use the epsilon zero policy to replace zeros)",
                    row=int(bad[0][0]) + 1,
                )
        off = np.flatnonzero(np.abs(y.sum(axis=1) - 1.0) > sum_tolerance)
        if off.size:
            raise DataError(f"shares sum to {y[off[0]].sum()!r}, not 1", row=int(off[0]) + 1)
        # rows already on the simplex are kept bit-for-bit
        drift = np.abs(y.sum(axis=1) - 1.0) > COMPOSITION_TOL
        if np.any(drift):
            y = np.array(y)
            y[drift] = closure(y[drift])
        return cls(
            observations=y,
            trend_scale=float(y.shape[0] if trend_scale is None else trend_scale),
            epoch=epoch,
        )

    @property
    def n_times(self) -> int:
        return int(self.observations.shape[0])

    @property
    def n_components(self) -> int:
        return int(self.observations.shape[1])

    @property
    def times(self) -> np.ndarray:
        """1-based time indices of the observations."""
        return np.arange(1, self.n_times + 1)

    def future_times(self, horizon: int) -> np.ndarray:
        return np.arange(self.n_times + 1, self.n_times + horizon + 1)

    def dates(self, times: Optional[np.ndarray] = None) -> List[str]:
        """ISO dates for time indices (defaults to the observed window)."""
        idx = self.times if times is None else np.asarray(times)
        return [(self.epoch + timedelta(days=int(t) - 1)).isoformat() for t in idx]

    def truncate(self, n_times: int) -> "CompositionalSeries":
        """First ``n_times`` observations, keeping the trend scale and epoch."""
        if not 1 <= n_times <= self.n_times:
            raise UsageError(f"cannot truncate a series of length {self.n_times} to {n_times}")
        return CompositionalSeries(
            observations=self.observations[:n_times],
            trend_scale=self.trend_scale,
            epoch=self.epoch,
        )

    def check_spec(self, spec: ModelSpec) -> None:
        if spec.n_components != self.n_components:
            raise UsageError(
                f"model has J={spec.n_components} but the series has {self.n_components} components"
            )

    def mean_covariates(self, spec: ModelSpec, times: Optional[np.ndarray] = None) -> np.ndarray:
        """Rows x_t, shape (len(times), r_beta0)."""
        idx = self.times if times is None else times
        return design_matrix(spec.mean_design, idx, self.trend_scale)

    def scale_covariates(self, spec: ModelSpec, times: Optional[np.ndarray] = None) -> np.ndarray:
        """Rows z_t, shape (len(times), r_gamma)."""
        idx = self.times if times is None else times
        return design_matrix(spec.resolved_scale_design, idx, self.trend_scale)

    def __repr__(self) -> str:
        return (
            f"CompositionalSeries(T={self.n_times}, J={self.n_components}, "
            f"trend_scale={self.trend_scale:g}, epoch={self.epoch.isoformat()})"
        )
