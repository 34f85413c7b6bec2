"""
Tests for flat key-value configuration documents.
"""

import pytest

from bdarma.core.engines import EngineKind
from bdarma.core.model import HorseshoePrior, MaskKind, ModelSpec
from bdarma.core.study import StudyConfig, simulation_study_2
from bdarma.io.config import (
    FitConfig,
    SelectConfig,
    dump_flat_config,
    load_flat_config,
    parse_flat_config,
    read_flat_config,
)
from bdarma.exceptions import ConfigError

FIT_DOCUMENT = """
# DAR(1) with a horseshoe on A
model.n_components = 4
model.ar_mask = "nearest_neighbor"   # banded
model.prior.ar.kind = horseshoe
model.prior.ar.tau = 0.5
model.mean_design.trend = linear
model.mean_design.fourier.0.period = 7
model.mean_design.fourier.0.harmonics = 3
engine = mle-darma
sampler.chains = 2
"""


class TestParse:
    def test_nested_sections_and_lists(self):
        tree, lines = parse_flat_config(FIT_DOCUMENT)
        assert tree["model"]["ar_mask"] == "nearest_neighbor"
        assert tree["model"]["mean_design"]["fourier"] == [{"period": 7, "harmonics": 3}]
        assert tree["engine"] == "mle-darma"
        assert lines["model.n_components"] == 3

    def test_json_values(self):
        tree, _ = parse_flat_config('a = [[0.5, 0.1]]\nb = "x # not a comment"\nc = true')
        assert tree == {"a": [[0.5, 0.1]], "b": "x # not a comment", "c": True}

    @pytest.mark.parametrize(
        "text, line",
        [
            ("a = 1\na = 2", 2),
            ("a = 1\n\nno equals sign", 3),
            ("a. = 1", 1),
            ("a = ", 1),
            ("a = 1\na.b = 2", 2),
            ("a.b = 1\na = 2", 2),
            ("x.0 = 1\nx.2 = 2", 1),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(ConfigError) as info:
            parse_flat_config(text)
        assert info.value.line == line


class TestLoad:
    def test_fit_config(self):
        config = load_flat_config(FIT_DOCUMENT, FitConfig)
        assert config.engine is EngineKind.MLE_DARMA
        assert config.model.ar_mask is MaskKind.NEAREST_NEIGHBOR
        assert config.model.prior.ar == HorseshoePrior(tau=0.5)
        assert config.model.mean_design.n_columns == 2 + 6
        assert config.sampler.chains == 2
        assert config.zero_policy == "reject"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            load_flat_config(FIT_DOCUMENT + "sampler.chanis = 4\n", FitConfig)
        assert info.value.line == 12
        assert info.value.key == "sampler.chanis"

    def test_invalid_value_points_at_key(self):
        text = FIT_DOCUMENT.replace("model.prior.ar.tau = 0.5", "model.prior.ar.tau = -1")
        with pytest.raises(ConfigError) as info:
            load_flat_config(text, FitConfig)
        assert info.value.line == 6

    def test_cross_field_rule_is_reported(self):
        with pytest.raises(ConfigError):
            load_flat_config("model.n_components = 3\nmodel.reference = 4", FitConfig)

    def test_unique_candidates(self):
        text = "\n".join(
            [
                "candidates.0.name = a",
                "candidates.0.model.n_components = 3",
                "candidates.1.name = a",
                "candidates.1.model.n_components = 3",
            ]
        )
        with pytest.raises(ConfigError):
            load_flat_config(text, SelectConfig)
        config = load_flat_config(text.replace("1.name = a", "1.name = b"), SelectConfig)
        assert [c.name for c in config.candidates] == ["a", "b"]
        assert config.method == "psis"

    def test_read_file(self, tmp_path):
        path = tmp_path / "fit.cfg"
        path.write_text(FIT_DOCUMENT)
        config, raw = read_flat_config(path, FitConfig)
        assert raw == FIT_DOCUMENT.encode()
        assert config.model.n_components == 4
        with pytest.raises(ConfigError):
            read_flat_config(tmp_path / "missing.cfg", FitConfig)


class TestDump:
    @pytest.mark.parametrize(
        "model",
        [
            ModelSpec(n_components=5, ar_order=2, ma_order=1, ar_mask=MaskKind.DIAGONAL),
            FitConfig(model=ModelSpec(n_components=3), engine=EngineKind.TVARMA, trend_scale=500.0),
        ],
    )
    def test_round_trip(self, model):
        assert load_flat_config(dump_flat_config(model), type(model)) == model

    def test_study_round_trip(self):
        study = simulation_study_2()
        text = dump_flat_config(study)
        assert "models.2.name = \"tVARMA\"" in text
        assert load_flat_config(text, StudyConfig) == study
