"""Base classes shared by all fitting engines."""

from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from bdarma.core.model.layout import ParamLayout
from bdarma.core.model.series import CompositionalSeries
from bdarma.core.model.spec import ModelSpec


class FitResult(BaseModel):
    """What every engine returns: a spec plus something that yields parameter draws."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    engine: str = Field(..., description="Engine name (bayes, mle-darma, tvarma)")
    spec: ModelSpec
    names: List[str] = Field(..., description="Full parameter layout names")
    elapsed_seconds: float = 0.0

    @property
    def layout(self) -> ParamLayout:
        return ParamLayout(self.spec)

    def point_estimate(self) -> np.ndarray:
        """Posterior mean or MLE over the full layout."""
        raise NotImplementedError

    def intervals(self, level: float = 0.95) -> np.ndarray:
        """Array (C, 2) of lower/upper interval bounds."""
        raise NotImplementedError

    def parameter_draws(self, n_paths: Optional[int] = None) -> np.ndarray:
        """Array (S*, C) of parameter vectors that drive forecast trajectories."""
        raise NotImplementedError

    def summary(self) -> Dict[str, Any]:
        """Short dictionary for logs and manifests."""
        raise NotImplementedError


class BaseEngine:
    """Abstract base class for fitting engines."""

    name: str = "base"

    def fit(self, spec: ModelSpec, series: CompositionalSeries) -> FitResult:
        """Fit ``spec`` to ``series``.

        Raises:
            UsageError: The series is too short for the model orders
            FitFailedError: The engine could not produce a usable fit
        """
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        """Engine settings, recorded in run manifests."""
        raise NotImplementedError
