"""Built-in study configurations.

Desk-scale defaults keep each study within a few hours on a desktop
(50 replicates, 4 chains of 500 warm-up + 500 sampling iterations);
``full_scale=True`` switches to the longer chains and more replicates.
"""

from datetime import date
from typing import Callable, Dict, List

import numpy as np

from bdarma.core.engines import EngineKind, OptimizerConfig, SamplerConfig
from bdarma.core.engines.tvarma import tvarma_spec
from bdarma.core.model.spec import (
    BandedNormalPrior,
    CovariateSpec,
    DesignNormalPrior,
    FourierTerm,
    HorseshoePrior,
    MaskKind,
    ModelSpec,
    NormalPrior,
    Parameterization,
    PriorConfig,
    TrendKind,
)
from bdarma.core.study.config import DgmKind, ModelEntry, StudyConfig, TrueParams

SIMULATION_BETA = [[-0.07], [0.10]]
SIMULATION_AR = [[[0.95, -0.18], [0.3, 0.95]]]
SIMULATION_MA = [[[0.65, 0.15], [0.2, 0.65]]]
SIMULATION_PHI = 1000.0
SIMULATION_SIGMA = [0.05, 0.05]
SIMULATION_RHO = 0.30

BENCHMARK_COMPONENTS = 12
BENCHMARK_TRAIN = 1492
BENCHMARK_TEST = 365
WEEKLY = FourierTerm(period=7, harmonics=3)
YEARLY = FourierTerm(period=365.25, harmonics=9)


def _simulation_spec() -> ModelSpec:
    return ModelSpec(
        n_components=3,
        ar_order=1,
        ma_order=1,
        parameterization=Parameterization.UNCENTERED,
        mean_design=CovariateSpec(intercept=True),
        scale_design=CovariateSpec(intercept=True),
    )


def _simulation_models(spec: ModelSpec) -> List[ModelEntry]:
    return [
        ModelEntry(name="B-DARMA", engine=EngineKind.BAYES, spec=spec),
        ModelEntry(name="DARMA", engine=EngineKind.MLE_DARMA, spec=spec),
        ModelEntry(
            name="tVARMA",
            engine=EngineKind.TVARMA,
            spec=tvarma_spec(
                3, ar_order=1, ma_order=1, parameterization=Parameterization.UNCENTERED
            ),
        ),
    ]


def _sampler(full_scale: bool, warmup: int, samples: int) -> SamplerConfig:
    if full_scale:
        return SamplerConfig(chains=4, warmup=warmup, samples=samples, init_range=1.0)
    return SamplerConfig(chains=4, warmup=500, samples=500, init_range=1.0)


def simulation_study_1(full_scale: bool = False, seed: int = 1) -> StudyConfig:
    """DARMA(1,1) data with phi = 1000; B-DARMA, DARMA and tVARMA fits."""
    spec = _simulation_spec()
    return StudyConfig(
        name="simulation_1",
        dgm=DgmKind.DARMA,
        dgm_spec=spec,
        true_params=TrueParams(
            ar=SIMULATION_AR,
            ma=SIMULATION_MA,
            beta=SIMULATION_BETA,
            gamma=[float(np.log(SIMULATION_PHI))],
        ),
        replicates=400 if full_scale else 50,
        t_total=540,
        t_train=500,
        t_test=40,
        models=_simulation_models(spec),
        sampler=_sampler(full_scale, 1000, 1000),
        optimizer=OptimizerConfig(),
        recovery_table="supp_table1_recovery.csv",
        forecast_table="table1_frmse.csv",
        seed=seed,
    )


def simulation_study_2(full_scale: bool = False, seed: int = 2) -> StudyConfig:
    """tVARMA(1,1) data with sigma = (0.05, 0.05) and rho = 0.3; same fits as study 1."""
    spec = _simulation_spec()
    return StudyConfig(
        name="simulation_2",
        dgm=DgmKind.TVARMA,
        dgm_spec=spec,
        true_params=TrueParams(
            ar=SIMULATION_AR,
            ma=SIMULATION_MA,
            beta=SIMULATION_BETA,
            sigma=SIMULATION_SIGMA,
            rho=SIMULATION_RHO,
        ),
        replicates=400 if full_scale else 50,
        t_total=540,
        t_train=500,
        t_test=40,
        models=_simulation_models(spec),
        sampler=_sampler(full_scale, 1000, 1000),
        optimizer=OptimizerConfig(),
        recovery_table="supp_table2_recovery.csv",
        forecast_table="table1_frmse_study2.csv",
        seed=seed,
    )


def benchmark_design() -> CovariateSpec:
    """Intercept, linear trend, weekly (K=3) and yearly (K=9) Fourier terms."""
    return CovariateSpec(intercept=True, trend=TrendKind.LINEAR, fourier=[WEEKLY, YEARLY])


def benchmark_models(n_components: int = BENCHMARK_COMPONENTS) -> List[ModelEntry]:
    """Four B-DAR(1) prior/mask variants plus DAR(1) by MLE and tVAR(1)."""
    design = benchmark_design()
    normal_prior = PriorConfig(
        ar=BandedNormalPrior(),
        beta=DesignNormalPrior(),
        gamma=DesignNormalPrior(),
    )

    def dar1(mask: MaskKind, prior: PriorConfig) -> ModelSpec:
        return ModelSpec(
            n_components=n_components,
            ar_order=1,
            ma_order=0,
            mean_design=design,
            ar_mask=mask,
            prior=prior,
        )

    horseshoe = PriorConfig(ar=NormalPrior(), beta=HorseshoePrior(), gamma=HorseshoePrior())
    bayes = EngineKind.BAYES
    return [
        ModelEntry(name="Normal Full", engine=bayes, spec=dar1(MaskKind.FULL, normal_prior)),
        ModelEntry(name="Horseshoe Full", engine=bayes, spec=dar1(MaskKind.FULL, horseshoe)),
        ModelEntry(
            name="Normal Nearest-Neighbor",
            engine=bayes,
            spec=dar1(MaskKind.NEAREST_NEIGHBOR, normal_prior),
        ),
        ModelEntry(
            name="Normal Diagonal", engine=bayes, spec=dar1(MaskKind.DIAGONAL, normal_prior)
        ),
        ModelEntry(
            name="DAR(1)", engine=EngineKind.MLE_DARMA, spec=dar1(MaskKind.FULL, normal_prior)
        ),
        ModelEntry(
            name="tVAR(1)",
            engine=EngineKind.TVARMA,
            spec=tvarma_spec(
                n_components,
                ar_order=1,
                mean_design=design,
                parameterization=Parameterization.UNCENTERED,
            ),
        ),
    ]


def airbnb_style_benchmark(full_scale: bool = False, seed: int = 3) -> StudyConfig:
    """Daily J=12 series with dense A, trend and weekly/yearly seasonality.

    Truth comes from ``benchmark_truth`` (derived from ``seed``); the scale
    of the DGM is constant, the fitted models give log(phi) the full design.
    """
    dgm_spec = ModelSpec(
        n_components=BENCHMARK_COMPONENTS,
        ar_order=1,
        ma_order=0,
        parameterization=Parameterization.CENTERED,
        mean_design=benchmark_design(),
        scale_design=CovariateSpec(intercept=True),
    )
    return StudyConfig(
        name="airbnb_style_benchmark",
        dgm=DgmKind.DARMA,
        dgm_spec=dgm_spec,
        true_params=None,
        replicates=20 if full_scale else 5,
        t_total=BENCHMARK_TRAIN + BENCHMARK_TEST,
        t_train=BENCHMARK_TRAIN,
        t_test=BENCHMARK_TEST,
        models=benchmark_models(),
        sampler=_sampler(full_scale, 1500, 1500),
        optimizer=OptimizerConfig(),
        record_recovery=False,
        recovery_table="benchmark_recovery.csv",
        forecast_table="table3_airbnb_style.csv",
        seed=seed,
        start_date=date(2015, 1, 1),
    )


PRESETS: Dict[str, Callable[..., StudyConfig]] = {
    "simulation_1": simulation_study_1,
    "simulation_2": simulation_study_2,
    "benchmark": airbnb_style_benchmark,
}
