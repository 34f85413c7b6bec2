"""Shared fixtures: small DARMA models and series simulated from them."""

import numpy as np
import pytest

from bdarma.core.model import CompositionalSeries, ModelSpec, ParamLayout, Parameterization
from bdarma.core.study import DgmConfig, TrueParams
from bdarma.core.study.dgm import simulate_replicate

AR_TRUTH = [[[0.6, 0.1], [-0.1, 0.5]]]
MA_TRUTH = [[[0.2, 0.0], [0.05, 0.15]]]
BETA_TRUTH = [[0.4], [-0.3]]
LOG_SCALE_TRUTH = float(np.log(200.0))


def simulate(
    spec: ModelSpec, truth: TrueParams, n_times: int, seed: int = 7
) -> CompositionalSeries:
    config = DgmConfig(dgm_spec=spec, true_params=truth, t_total=n_times, burn_in=50, seed=seed)
    series, _ = simulate_replicate(config, 0)
    return series


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def simulate_series():
    """Factory: simulate_series(spec, truth, n_times, seed=7)."""
    return simulate


@pytest.fixture
def var1_spec():
    """J=3 DARMA(1,0), centered, intercept-only designs."""
    return ModelSpec(n_components=3, ar_order=1, ma_order=0)


@pytest.fixture
def var1_truth():
    return TrueParams(ar=AR_TRUTH, beta=BETA_TRUTH, gamma=[LOG_SCALE_TRUTH])


@pytest.fixture
def var1_series(var1_spec, var1_truth):
    return simulate(var1_spec, var1_truth, 300)


@pytest.fixture
def darma11_spec():
    """J=3 DARMA(1,1), uncentered."""
    return ModelSpec(
        n_components=3, ar_order=1, ma_order=1, parameterization=Parameterization.UNCENTERED
    )


@pytest.fixture
def darma11_truth():
    return TrueParams(ar=AR_TRUTH, ma=MA_TRUTH, beta=BETA_TRUTH, gamma=[LOG_SCALE_TRUTH])


@pytest.fixture
def darma11_series(darma11_spec, darma11_truth):
    return simulate(darma11_spec, darma11_truth, 60)


@pytest.fixture
def random_theta():
    """Factory: a small random theta honoring the masks of ``spec``."""

    def make(spec: ModelSpec, seed: int = 0) -> np.ndarray:
        layout = ParamLayout(spec)
        gen = np.random.default_rng(seed)
        theta = np.zeros(layout.size)
        theta[layout.free_index] = gen.normal(0.0, 0.2, layout.n_free)
        # keep the scale in a realistic range
        _, _, _, gamma = layout.split(theta)
        if gamma.size:
            theta[layout.gamma_slice.start] = np.log(50.0) + gen.normal(0.0, 0.3)
        return theta

    return make
