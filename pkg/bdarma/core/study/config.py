"""Configuration of simulation studies and the synthetic benchmark."""

from datetime import date
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from bdarma.core.engines import EngineKind, OptimizerConfig, SamplerConfig
from bdarma.core.engines.tvarma import as_tvarma_spec
from bdarma.core.model.layout import ParamLayout, ParamVector
from bdarma.core.model.spec import ModelSpec


class DgmKind(str, Enum):
    """Data generating model: Dirichlet observations or Gaussian alr innovations."""

    DARMA = "darma"
    TVARMA = "tvarma"


class TrueParams(BaseModel):
    """True coefficients of the data generating model.

    ``sigma`` and ``rho`` only apply to the tVARMA DGM: the innovation
    covariance has standard deviations ``sigma`` and a common correlation
    ``rho`` between every pair of coordinates.
    """

    model_config = ConfigDict(frozen=True)

    ar: List[List[List[float]]] = Field(
        default_factory=list, description="P matrices of (J-1)x(J-1)"
    )
    ma: List[List[List[float]]] = Field(
        default_factory=list, description="Q matrices of (J-1)x(J-1)"
    )
    beta: List[List[float]] = Field(
        default_factory=list, description="(J-1) rows of mean-design coefficients"
    )
    gamma: List[float] = Field(default_factory=list, description="Scale-design coefficients")
    sigma: List[float] = Field(default_factory=list, description="Innovation sds (tVARMA DGM)")
    rho: float = Field(0.0, gt=-1, lt=1, description="Innovation correlation (tVARMA DGM)")

    def to_vector(self, spec: ModelSpec) -> np.ndarray:
        """Flat theta in the layout of ``spec``."""
        layout = ParamLayout(spec)
        d = spec.dim
        return layout.pack(
            ParamVector(
                ar=np.asarray(self.ar, dtype=float).reshape(spec.ar_order, d, d),
                ma=np.asarray(self.ma, dtype=float).reshape(spec.ma_order, d, d),
                beta=np.asarray(self.beta, dtype=float).reshape(d, spec.mean_design.n_columns),
                gamma=np.asarray(self.gamma, dtype=float),
            )
        )

    def by_name(self, spec: ModelSpec) -> Dict[str, float]:
        layout = ParamLayout(spec)
        return dict(zip(layout.names, self.to_vector(spec)))

    def covariance(self, dim: int) -> np.ndarray:
        sd = np.asarray(self.sigma, dtype=float)
        if sd.size != dim:
            raise ValueError(f"sigma has {sd.size} entries, expected {dim}")
        corr = np.full((dim, dim), self.rho)
        np.fill_diagonal(corr, 1.0)
        return corr * np.outer(sd, sd)


class ModelEntry(BaseModel):
    """One model fitted to every replicate."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    engine: EngineKind = EngineKind.BAYES
    spec: ModelSpec

    @property
    def fitted_spec(self) -> ModelSpec:
        """Spec of the returned fit (tVARMA drops the scale design)."""
        if self.engine is EngineKind.TVARMA:
            return as_tvarma_spec(self.spec)
        return self.spec


class DgmConfig(BaseModel):
    """A data generating model and the window it is simulated over.

    ``t_train`` sets the trend scale (t / t_train); it defaults to
    ``t_total``.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "simulation"
    dgm: DgmKind = DgmKind.DARMA
    dgm_spec: ModelSpec
    true_params: Optional[TrueParams] = Field(
        None, description="Required except for the benchmark, which derives its truth from the seed"
    )
    t_total: int = Field(540, ge=2)
    t_train: Optional[int] = Field(None, ge=1)
    burn_in: int = Field(100, ge=0)
    max_abs_eta: float = Field(
        30.0, gt=0, description="Replicates whose |eta| exceeds this are regenerated"
    )
    max_regenerations: int = Field(20, ge=0)
    seed: int = Field(0, ge=0)
    start_date: date = date(2015, 1, 1)

    @property
    def trend_scale(self) -> float:
        return float(self.t_train or self.t_total)

    @model_validator(mode="after")
    def _check_dgm(self) -> "DgmConfig":
        if self.dgm is DgmKind.TVARMA and self.true_params is not None:
            self.true_params.covariance(self.dgm_spec.dim)
        return self


class StudyConfig(DgmConfig):
    """A replicated simulation study.

    Every replicate simulates ``t_total`` steps from the DGM (after a
    discarded burn-in), fits every model on the first ``t_train`` and
    forecasts the last ``t_test``.
    """

    name: str = "study"
    replicates: int = Field(50, ge=1)
    t_train: int = Field(500, ge=1)
    t_test: int = Field(40, ge=1)
    models: List[ModelEntry] = Field(..., min_length=1)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    interval_level: float = Field(0.95, gt=0, lt=1)
    record_recovery: bool = True
    recovery_table: str = "supp_table1_recovery.csv"
    forecast_table: str = "table1_frmse.csv"

    @model_validator(mode="after")
    def _check(self) -> "StudyConfig":
        if self.t_train + self.t_test != self.t_total:
            raise ValueError(
                f"t_train + t_test = {self.t_train + self.t_test} "
                f"differs from t_total = {self.t_total}"
            )
        if self.t_train <= max(entry.spec.max_lag for entry in self.models):
            raise ValueError("t_train must exceed max(P, Q) of every model")
        names = [entry.name for entry in self.models]
        if len(set(names)) != len(names):
            raise ValueError("model names must be unique")
        for entry in self.models:
            if entry.spec.n_components != self.dgm_spec.n_components:
                raise ValueError(
                    f"model {entry.name} has a different number of components than the DGM"
                )
        return self
