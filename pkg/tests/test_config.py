"""Tests for run configuration: defaults file, precedence, validation, and seeds."""

import json

import pytest

from robust_consensus.config import (
    DEFAULTS_FILENAME,
    RunConfig,
    derive_seed,
    load_defaults,
    parse_list,
    parse_range,
    resolve_config,
)
from robust_consensus.errors import ConfigError


class TestRunConfigDefaults:
    def test_builtin_values(self):
        config = RunConfig(command="synth", delta=0.3).validate()
        assert config.method == "alg1"
        assert config.q == 0.1
        assert config.epsilon == 1e-3
        assert config.K == 2
        assert (config.d_min, config.d_max) == (0.01, 1e4)
        assert config.backend == "highs"

    def test_oracle_defaults(self):
        config = resolve_config("oracle", {"delta": 0.3})
        assert config.methods == ("alg1", "alg2", "l1full", "linf", "ransac")
        assert (config.measurements, config.dim) == (10, 2)
        assert config.repeats == 50

    def test_as_dict_is_json_friendly(self, temp_dir):
        config = RunConfig(command="sfm", delta=0.01, cameras_path=temp_dir / "c.txt")
        data = config.as_dict()
        assert data["cameras_path"] == str(temp_dir / "c.txt")
        assert data["methods"] == ["alg1"]
        json.dumps(data)


class TestValidation:
    @pytest.mark.parametrize(
        ("overrides", "field"),
        [
            ({"delta": None}, "delta"),
            ({"delta": 0.0}, "delta"),
            ({"q_values": (1.0,)}, "q"),
            ({"epsilon": -1.0}, "epsilon"),
            ({"K": 0}, "K"),
            ({"K_sweep": (0, 1)}, "sweep-k"),
            ({"d_min": 5.0, "d_max": 1.0}, "dmin"),
            ({"norm": "l2"}, "norm"),
            ({"backend": "simplex"}, "backend"),
            ({"ratios": (1.5,)}, "ratio"),
            ({"seed": -1}, "seed"),
            ({"repeats": 0}, "repeats"),
            ({"measurements": 4, "dim": 8}, "measurements"),
            ({"inlier_sigma": -0.1}, "sigma"),
            ({"methods": ("lmeds",)}, "method"),
            ({"methods": ()}, "method"),
        ],
    )
    def test_invalid_field_is_named(self, overrides, field):
        values = {"delta": 0.3, **overrides}
        with pytest.raises(ConfigError) as excinfo:
            RunConfig(command="synth", **values).validate()
        assert excinfo.value.field == field
        assert str(excinfo.value).startswith(f"{field}:")

    def test_sfm_rejects_baselines_without_lp(self):
        with pytest.raises(ConfigError, match="ransac"):
            RunConfig(command="sfm", methods=("ransac",), delta=0.01).validate()

    def test_single_q_outside_synth(self):
        with pytest.raises(ConfigError, match="single q"):
            RunConfig(command="sfm", delta=0.01, q_values=(0.1, 0.2)).validate()

    def test_unknown_command(self):
        with pytest.raises(ConfigError, match="command"):
            RunConfig(command="fit", delta=0.1).validate()


class TestDefaultsFile:
    def test_missing_implicit_file(self, temp_dir):
        assert load_defaults(cwd=temp_dir) == {}

    def test_implicit_file_in_working_directory(self, temp_dir):
        (temp_dir / DEFAULTS_FILENAME).write_text('{"delta": 0.25, "K": 4}', encoding="utf-8")
        assert load_defaults(cwd=temp_dir) == {"delta": 0.25, "K": 4}

    def test_missing_explicit_file(self, temp_dir):
        with pytest.raises(ConfigError, match="not found"):
            load_defaults(temp_dir / "nope.json")

    def test_malformed_json(self, temp_dir):
        path = temp_dir / "defaults.json"
        path.write_text("{delta: ", encoding="utf-8")
        with pytest.raises(ConfigError, match="malformed JSON"):
            load_defaults(path)

    def test_unknown_key(self, temp_dir):
        path = temp_dir / "defaults.json"
        path.write_text('{"workers": 4}', encoding="utf-8")
        with pytest.raises(ConfigError) as excinfo:
            load_defaults(path)
        assert excinfo.value.field == "workers"

    def test_wrong_type(self, temp_dir):
        path = temp_dir / "defaults.json"
        path.write_text('{"K": "two"}', encoding="utf-8")
        with pytest.raises(ConfigError, match="unexpected type"):
            load_defaults(path)

    def test_boolean_is_not_a_number(self, temp_dir):
        path = temp_dir / "defaults.json"
        path.write_text('{"repeats": true}', encoding="utf-8")
        with pytest.raises(ConfigError):
            load_defaults(path)

    def test_top_level_must_be_object(self, temp_dir):
        path = temp_dir / "defaults.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_defaults(path)


class TestPrecedence:
    def test_file_overrides_builtin(self):
        config = resolve_config("synth", {"delta": 0.3}, {"K": 5, "q": [0.1, 0.5]})
        assert config.K == 5
        assert config.q_values == (0.1, 0.5)

    def test_flag_overrides_file(self):
        config = resolve_config("synth", {"delta": 0.3, "K": 3}, {"K": 5})
        assert config.K == 3

    def test_none_means_not_given(self):
        config = resolve_config("synth", {"delta": None, "K": None}, {"delta": 0.2})
        assert config.delta == 0.2
        assert config.K == 2

    def test_file_overrides_command_default(self):
        config = resolve_config("oracle", {"delta": 0.3}, {"repeats": 3})
        assert config.repeats == 3

    def test_file_methods_as_string(self):
        config = resolve_config("synth", {"delta": 0.3}, {"methods": "alg1, ransac"})
        assert config.methods == ("alg1", "ransac")

    def test_invalid_merged_value_raises(self):
        with pytest.raises(ConfigError, match="ratio"):
            resolve_config("synth", {"delta": 0.3}, {"ratios": [0.2, 1.2]})


class TestParsing:
    def test_parse_list(self):
        assert parse_list("q", "0.1, 0.2,0.5") == (0.1, 0.2, 0.5)
        assert parse_list("q", 0.3) == (0.3,)
        assert parse_list("method", "alg1,alg2", str) == ("alg1", "alg2")

    def test_parse_list_failure_names_field(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_list("ratio", "0.1,abc")
        assert excinfo.value.field == "ratio"

    def test_parse_range_inclusive(self):
        assert parse_range("sweep-k", "1..10") == tuple(range(1, 11))

    def test_parse_range_list(self):
        assert parse_range("sweep-k", "1,2,5") == (1, 2, 5)

    @pytest.mark.parametrize("value", ["5..1", "a..3"])
    def test_parse_range_invalid(self, value):
        with pytest.raises(ConfigError, match="sweep-k"):
            parse_range("sweep-k", value)


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)

    def test_keys_change_the_seed(self):
        seeds = {derive_seed(0, g, r) for g in range(4) for r in range(5)}
        assert len(seeds) == 20

    def test_base_seed_changes_the_seed(self):
        assert derive_seed(0, 0, 0) != derive_seed(1, 0, 0)
