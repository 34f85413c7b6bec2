"""
Tests for CSV artifacts, fit directories and run manifests.
"""

import json

import numpy as np
import pandas as pd
import pytest

from bdarma.core.engines import OptimizerConfig, SamplerConfig
from bdarma.core.engines.bayes import sample_posterior
from bdarma.core.engines.mle import fit_mle_darma
from bdarma.core.engines.tvarma import fit_tvarma
from bdarma.core.model import ModelSpec
from bdarma.exceptions import DataError
from bdarma.io import (
    MANIFEST_FILE,
    RunManifest,
    draws_from_frame,
    draws_to_frame,
    load_fit,
    read_series,
    save_fit,
    series_from_frame,
    write_series,
)


def series_frame(rows):
    dates = pd.date_range("2024-02-27", periods=len(rows), freq="D").strftime("%Y-%m-%d")
    frame = pd.DataFrame(rows, columns=[f"component_{j}" for j in range(1, len(rows[0]) + 1)])
    frame.insert(0, "date", list(dates))
    return frame


class TestSeriesFiles:
    def test_exact_round_trip(self, var1_series, tmp_path):
        path = write_series(var1_series, tmp_path / "series.csv")
        back = read_series(path)
        np.testing.assert_array_equal(back.observations, var1_series.observations)
        assert back.epoch == var1_series.epoch
        assert back.trend_scale == var1_series.trend_scale

    def test_leap_day_is_consecutive(self):
        series = series_from_frame(series_frame([[0.2, 0.8], [0.3, 0.7], [0.4, 0.6], [0.5, 0.5]]))
        assert series.dates([3]) == ["2024-02-29"]

    def test_zero_share(self):
        frame = series_frame([[0.2, 0.8], [0.0, 1.0]])
        with pytest.raises(DataError) as info:
            series_from_frame(frame)
        assert info.value.row == 2
        series = series_from_frame(frame, zero_policy="epsilon", epsilon=1e-6)
        assert np.all(series.observations > 0)

    def test_date_gap(self):
        frame = series_frame([[0.2, 0.8], [0.3, 0.7], [0.4, 0.6]])
        frame.loc[2, "date"] = "2024-03-02"
        with pytest.raises(DataError) as info:
            series_from_frame(frame)
        assert info.value.row == 3

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda f: f.drop(columns="date"),
            lambda f: f.drop(columns="component_2"),
            lambda f: f.rename(columns={"component_2": "component_3"}),
            lambda f: f.assign(date=["2024-02-27", "not a date"]),
            lambda f: f.assign(component_1=["0.2", "x"]),
            lambda f: f.assign(component_1=[0.2, 0.5]),
        ],
    )
    def test_rejects_bad_tables(self, mutate):
        with pytest.raises(DataError):
            series_from_frame(mutate(series_frame([[0.2, 0.8], [0.3, 0.7]])))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_series(tmp_path / "absent.csv")


class TestFitDirectories:
    def test_mle_round_trip(self, var1_spec, var1_series, tmp_path):
        fit = fit_mle_darma(var1_spec, var1_series)
        written = save_fit(tmp_path / "fit", fit, var1_series)
        assert {p.name for p in written} == {
            "series.csv",
            "model.cfg",
            "fit.json",
            "estimates.csv",
            "covariance.csv",
        }
        loaded = load_fit(tmp_path / "fit")
        assert loaded.spec == var1_spec
        np.testing.assert_array_equal(loaded.fit.estimate, fit.estimate)
        np.testing.assert_array_equal(loaded.fit.covariance, fit.covariance)
        assert loaded.fit.log_likelihood == fit.log_likelihood
        assert loaded.meta.converged

    def test_tvarma_round_trip(self, var1_series, tmp_path):
        fit = fit_tvarma(var1_series, config=OptimizerConfig())
        save_fit(tmp_path, fit, var1_series)
        loaded = load_fit(tmp_path).fit
        np.testing.assert_array_equal(loaded.cholesky_params, fit.cholesky_params)
        np.testing.assert_allclose(loaded.sigma, fit.sigma, rtol=1e-12)
        sigma = pd.read_csv(tmp_path / "sigma.csv")
        assert list(sigma["parameter"]) == ["sigma[1]", "sigma[2]", "rho[1,2]"]

    def test_draws_round_trip(self, var1_series):
        spec = ModelSpec(n_components=3)
        config = SamplerConfig(chains=2, warmup=50, samples=50, seed=2)
        draws = sample_posterior(spec, var1_series, config, 1)
        back = draws_from_frame(draws_to_frame(draws), spec)
        np.testing.assert_array_equal(back.draws, draws.draws)
        np.testing.assert_array_equal(back.chain, draws.chain)
        np.testing.assert_allclose(back.rhat, draws.rhat)

    def test_masked_draws_rejected(self, var1_series):
        spec = ModelSpec(n_components=3, ar_mask="diagonal")
        config = SamplerConfig(chains=1, warmup=20, samples=20, seed=2)
        draws = sample_posterior(spec, var1_series, config, 1)
        frame = draws_to_frame(draws)
        frame["A1[1,2]"] = 0.1
        with pytest.raises(DataError):
            draws_from_frame(frame, spec)

    def test_mismatched_series(self, var1_spec, var1_series, tmp_path):
        save_fit(tmp_path, fit_mle_darma(var1_spec, var1_series), var1_series)
        write_series(var1_series.truncate(100), tmp_path / "series.csv")
        with pytest.raises(DataError):
            load_fit(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError):
            load_fit(tmp_path / "nothing")


class TestManifest:
    def test_hash_covers_inputs(self, tmp_path):
        data = tmp_path / "series.csv"
        data.write_text("date,component_1,component_2\n")
        first = RunManifest.start("fit", 1, {"series": data}, b"engine = mle-darma\n")
        again = RunManifest.start("fit", 1, {"series": data}, b"engine = mle-darma\n")
        assert first.config_hash == again.config_hash
        data.write_text("date,component_1,component_2\n2024-01-01,0.5,0.5\n")
        changed = RunManifest.start("fit", 1, {"series": data}, b"engine = mle-darma\n")
        assert changed.config_hash != first.config_hash
        assert RunManifest.start("fit", 2, {"series": data}).config_hash != changed.config_hash

    def test_write(self, tmp_path):
        manifest = RunManifest.start("simulate", 3, {})
        artifact = tmp_path / "out" / "series.csv"
        artifact.parent.mkdir()
        artifact.write_text("x\n")
        path = manifest.write(tmp_path / "out", [artifact])
        assert path.name == MANIFEST_FILE
        stored = json.loads(path.read_text())
        assert stored["artifacts"] == ["series.csv"]
        assert stored["seed"] == 3
        assert stored["finished"] is not None
