"""
End-to-end tests of the command line through ``main``.
"""

import json

import pandas as pd
import pytest

from bdarma.cli.app import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, create_parser, main
from bdarma.core.engines import EngineKind
from bdarma.core.engines.tvarma import tvarma_spec
from bdarma.core.model import ModelSpec, Parameterization
from bdarma.core.study import ModelEntry, StudyConfig, TrueParams
from bdarma.io.config import dump_flat_config

DGM_DOCUMENT = """
dgm_spec.n_components = 3
dgm_spec.ar_order = 1
true_params.ar = [[[0.5, 0.1], [0.0, 0.4]]]
true_params.beta = [[0.3], [-0.2]]
true_params.gamma = [5.7]
t_total = 130
t_train = 120
burn_in = 30
seed = 5
"""

FIT_DOCUMENT = """
model.n_components = 3
engine = mle-darma
"""


def write(path, text):
    path.write_text(text)
    return str(path)


def fit_args(data, config, out):
    return ["fit", "--data", str(data), "--config", str(config), "--out", str(out)]


def artifact_bytes(directory):
    paths = sorted(directory.iterdir())
    return {p.name: p.read_bytes() for p in paths if p.name != "manifest.json"}


@pytest.fixture
def simulated(tmp_path):
    config = write(tmp_path / "dgm.cfg", DGM_DOCUMENT)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", config, "--out", str(out), "--quiet"]) == EXIT_OK
    return out


@pytest.fixture
def fitted(tmp_path, simulated):
    config = write(tmp_path / "fit.cfg", FIT_DOCUMENT)
    out = tmp_path / "fit"
    assert main(fit_args(simulated / "train.csv", config, out) + ["--quiet"]) == EXIT_OK
    return out


class TestSimulate:
    def test_outputs(self, simulated):
        expected = {"series.csv", "train.csv", "test.csv", "truth.csv"}
        assert set(artifact_bytes(simulated)) == expected
        assert len(pd.read_csv(simulated / "train.csv")) == 120
        assert len(pd.read_csv(simulated / "test.csv")) == 10
        truth = pd.read_csv(simulated / "truth.csv")
        assert truth.loc[truth["parameter"] == "A1[1,2]", "value"].item() == pytest.approx(0.1)
        manifest = json.loads((simulated / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 5
        assert "series.csv" in manifest["artifacts"]

    def test_rerun_is_byte_identical(self, simulated, tmp_path):
        again = tmp_path / "again"
        main(["simulate", "--config", str(tmp_path / "dgm.cfg"), "--out", str(again), "--quiet"])
        assert artifact_bytes(again) == artifact_bytes(simulated)
        first = json.loads((simulated / "manifest.json").read_text())
        second = json.loads((again / "manifest.json").read_text())
        assert first["config_hash"] == second["config_hash"]

    def test_seed_override(self, simulated, tmp_path):
        other = tmp_path / "other"
        config = str(tmp_path / "dgm.cfg")
        main(["simulate", "--config", config, "--seed", "6", "--out", str(other), "--quiet"])
        assert artifact_bytes(other)["series.csv"] != artifact_bytes(simulated)["series.csv"]

    def test_negative_seed(self, tmp_path):
        config = write(tmp_path / "dgm.cfg", DGM_DOCUMENT)
        args = ["simulate", "--config", config, "--seed", "-1", "--out", str(tmp_path / "x")]
        assert main(args) == EXIT_USAGE


class TestFit:
    def test_outputs(self, fitted):
        assert {"estimates.csv", "covariance.csv", "model.cfg", "fit.json", "series.csv"} <= set(
            artifact_bytes(fitted)
        )
        manifest = json.loads((fitted / "manifest.json").read_text())
        assert manifest["settings"]["engine"] == "mle-darma"

    def test_rerun_is_byte_identical(self, fitted, simulated, tmp_path):
        again = tmp_path / "again"
        main(fit_args(simulated / "train.csv", tmp_path / "fit.cfg", again) + ["--quiet"])
        assert artifact_bytes(again) == artifact_bytes(fitted)

    def test_engine_and_mask_override(self, simulated, tmp_path):
        config = write(tmp_path / "fit.cfg", FIT_DOCUMENT)
        out = tmp_path / "tvarma"
        args = fit_args(simulated / "train.csv", config, out)
        assert main(args + ["--engine", "tvarma", "--mask", "diagonal", "--quiet"]) == EXIT_OK
        estimates = pd.read_csv(out / "estimates.csv").set_index("parameter")["estimate"]
        assert estimates["A1[1,2]"] == 0.0
        assert (out / "sigma.csv").is_file()

    def test_zero_share_is_a_data_error(self, simulated, tmp_path, capsys):
        frame = pd.read_csv(simulated / "train.csv", dtype={"date": str})
        frame.loc[4, "component_1"] = 0.0
        frame.loc[4, "component_2"] = 1.0 - frame.loc[4, "component_3"]
        frame.to_csv(tmp_path / "zero.csv", index=False)
        config = write(tmp_path / "fit.cfg", FIT_DOCUMENT)
        args = fit_args(tmp_path / "zero.csv", config, tmp_path / "f")
        assert main(args) == EXIT_DATA
        assert "row 5" in capsys.readouterr().err
        assert main(args + ["--zero-policy", "epsilon", "--quiet"]) == EXIT_OK

    def test_unknown_key_is_a_usage_error(self, simulated, tmp_path, capsys):
        config = write(tmp_path / "fit.cfg", FIT_DOCUMENT + "optimizer.max_iters = 5\n")
        assert main(fit_args(simulated / "train.csv", config, tmp_path / "f")) == EXIT_USAGE
        assert "line 4" in capsys.readouterr().err

    def test_optimizer_failure(self, simulated, tmp_path):
        document = FIT_DOCUMENT + "optimizer.max_iter = 1\noptimizer.retries = 0\n"
        config = write(tmp_path / "fit.cfg", document)
        args = fit_args(simulated / "train.csv", config, tmp_path / "f")
        assert main(args + ["--quiet"]) == EXIT_NUMERICAL

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as info:
            main(["fit", "--config", "x.cfg"])
        assert info.value.code == 2


class TestForecastAndEvaluate:
    def test_metrics_match_evaluate(self, fitted, simulated, tmp_path):
        forecast_dir, evaluate_dir = tmp_path / "fc", tmp_path / "ev"
        actuals = str(simulated / "test.csv")
        args = ["forecast", "--fit", str(fitted), "--horizon", "10", "--actuals", actuals]
        assert main(args + ["--seed", "3", "--out", str(forecast_dir), "--quiet"]) == EXIT_OK
        forecast = pd.read_csv(forecast_dir / "forecast.csv")
        columns = ["t", "date", "component", "mean", "median", "q2.5", "q97.5"]
        assert list(forecast.columns) == columns
        assert forecast["t"].min() == 121
        assert len(pd.read_csv(forecast_dir / "residuals.csv")) == 10 * 2

        args = ["evaluate", "--forecast", str(forecast_dir / "forecast.csv"), "--actuals", actuals]
        assert main(args + ["--out", str(evaluate_dir), "--quiet"]) == EXIT_OK
        written = (forecast_dir / "metrics.csv").read_bytes()
        assert (evaluate_dir / "metrics.csv").read_bytes() == written
        metrics = pd.read_csv(evaluate_dir / "metrics.csv").set_index("component")
        assert metrics.loc["Total", "frmse"] == pytest.approx(metrics["frmse"].iloc[:3].sum())

    def test_same_seed_same_forecast(self, fitted, tmp_path):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            args = ["forecast", "--fit", str(fitted), "--horizon", "5", "--seed", "9"]
            main(args + ["--out", str(out), "--quiet"])
        assert artifact_bytes(outs[0]) == artifact_bytes(outs[1])

    def test_bad_horizon(self, fitted, tmp_path):
        args = ["forecast", "--fit", str(fitted), "--horizon", "0", "--out", str(tmp_path / "x")]
        assert main(args) == EXIT_USAGE

    def test_actuals_too_short(self, fitted, simulated, tmp_path, capsys):
        actuals = str(simulated / "test.csv")
        args = ["forecast", "--fit", str(fitted), "--horizon", "12", "--actuals", actuals]
        assert main(args + ["--out", str(tmp_path / "x"), "--quiet"]) == EXIT_USAGE
        assert "t=131" in capsys.readouterr().err

    def test_missing_fit_directory(self, tmp_path):
        missing = str(tmp_path / "none")
        args = ["forecast", "--fit", missing, "--horizon", "3", "--out", str(tmp_path / "x")]
        assert main(args) == EXIT_DATA


class TestReplicateStudy:
    def test_config_run(self, tmp_path):
        spec = ModelSpec(n_components=3, ar_order=1)
        study = StudyConfig(
            name="cli",
            dgm_spec=spec,
            true_params=TrueParams(ar=[[[0.5, 0.0], [0.0, 0.5]]], beta=[[0.2], [0.1]], gamma=[5.0]),
            replicates=2,
            t_total=110,
            t_train=100,
            t_test=10,
            burn_in=20,
            models=[
                ModelEntry(name="DAR", engine=EngineKind.MLE_DARMA, spec=spec),
                ModelEntry(
                    name="tVAR",
                    engine=EngineKind.TVARMA,
                    spec=tvarma_spec(3, parameterization=Parameterization.UNCENTERED),
                ),
            ],
            forecast_table="forecast_table.csv",
            recovery_table="recovery_table.csv",
            seed=2,
        )
        config = write(tmp_path / "study.cfg", dump_flat_config(study))
        out = tmp_path / "study"
        args = ["replicate-study", "--config", config, "--threads", "2", "--out", str(out)]
        args.append("--quiet")
        assert main(args) == EXIT_OK
        table = pd.read_csv(out / "forecast_table.csv")
        assert list(table["component"]) == ["y1", "y2", "y3", "Total"]
        assert {"DAR FRMSE", "tVAR FMAE"} <= set(table.columns)
        assert (out / "recovery_table.csv").is_file()
        assert (out / "status.csv").is_file()


def test_parser_lists_every_command():
    parser = create_parser()
    help_text = parser.format_help()
    for command in ("simulate", "fit", "forecast", "select", "evaluate", "replicate-study"):
        assert command in help_text


SELECT_DOCUMENT = """
candidates.0.name = "DAR(1)"
candidates.0.model.n_components = 3
candidates.0.model.ar_order = 1
candidates.1.name = "intercept"
candidates.1.model.n_components = 3
candidates.1.model.ar_order = 0
lfo.min_history = 116
sampler.chains = 1
sampler.warmup = 80
sampler.samples = 80
"""


@pytest.mark.slow
def test_select_ranks_candidates(simulated, tmp_path):
    config = write(tmp_path / "select.cfg", SELECT_DOCUMENT)
    out = tmp_path / "select"
    args = ["select", "--data", str(simulated / "train.csv"), "--config", config]
    assert main(args + ["--seed", "1", "--out", str(out), "--quiet"]) == EXIT_OK
    ranking = pd.read_csv(out / "ranking.csv")
    assert set(ranking["model"]) == {"DAR(1)", "intercept"}
    assert list(ranking["rank"]) == [1, 2]
    assert ranking["elpd_diff"].iloc[0] == 0.0
    assert (ranking["status"] == "ok").all()
    assert (out / "lfo_0.csv").is_file() and (out / "lfo_1.csv").is_file()
