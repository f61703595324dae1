"""Tests for configuration loading and precedence."""
from __future__ import annotations

import argparse

import pytest

from src.common.errors import ConfigError
from src.models.experiment import ExperimentConfig
from src.pipeline.config import (
    SEED_ENV,
    add_config_arguments,
    build_config,
    coerce_value,
    config_from_args,
    load_config,
    load_config_file,
)
from src.pipeline.presets import PRESETS, get_preset


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "experiment.toml"
    path.write_text(
        'dataset = "synthetic:phase"\n'
        "lookback = 48\n"
        "horizon = 6\n"
        "lambda_t = [200, 400]\n"
        "lambda_p = [0.02]\n"
        "seed = 3\n",
        encoding="utf-8",
    )
    return path


def _parse(argv):
    parser = argparse.ArgumentParser()
    add_config_arguments(parser)
    return parser.parse_args(argv)


class TestFileLoading:
    """Test suite for flat TOML config files."""

    def test_values_are_coerced(self, config_file) -> None:
        values = load_config_file(config_file)
        assert values["lambda_t"] == (200, 400)
        assert values["lambda_p"] == (0.02,)
        assert values["lookback"] == 48

    def test_load_config(self, config_file) -> None:
        config = load_config(config_file)
        assert config.horizon == 6
        assert config.lambda_n == ExperimentConfig().lambda_n

    def test_nested_tables_rejected(self, tmp_path) -> None:
        path = tmp_path / "nested.toml"
        path.write_text("[solid]\nlambda_n = [5]\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config_file(path)

    def test_unknown_key(self, tmp_path) -> None:
        path = tmp_path / "typo.toml"
        path.write_text("lambda_q = [1]\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config_file(path)

    def test_missing_file(self, tmp_path) -> None:
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path) -> None:
        path = tmp_path / "broken.toml"
        path.write_text("lookback = = 3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config_file(path)


class TestCoercion:
    """Test suite for value coercion."""

    @pytest.mark.parametrize(
        "key, raw, expected",
        [
            ("lambda_n", "5,10,20", (5, 10, 20)),
            ("lr_ratio", "0", (0.0,)),
            ("split", [0.6, 0.2, 0.2], (0.6, 0.2, 0.2)),
            ("circular_phase", "true", True),
            ("period", "none", None),
            ("period", "24", 24),
            ("threshold", "-2.5", -2.5),
        ],
    )
    def test_coerce(self, key, raw, expected) -> None:
        assert coerce_value(key, raw) == expected

    def test_fractional_integer(self) -> None:
        with pytest.raises(ConfigError):
            coerce_value("lookback", 3.5)

    def test_bad_boolean(self) -> None:
        with pytest.raises(ConfigError):
            coerce_value("ablation", "maybe")


class TestPrecedence:
    """Test suite for defaults < preset < file < CLI < environment."""

    def test_preset_fills_grids(self) -> None:
        config = build_config(cli_values={"preset": "illness"}, environ={})
        assert config.dataset == "Illness"
        assert config.lookback == 104
        assert config.horizon == 24
        assert config.grid_size == 108

    def test_file_overrides_preset(self) -> None:
        config = build_config(file_values={"preset": "ETTh1", "horizon": 192}, environ={})
        assert config.split == (0.6, 0.2, 0.2)
        assert config.horizon == 192

    def test_cli_overrides_file(self, config_file) -> None:
        config = config_from_args(_parse(["--config", str(config_file), "--horizon", "12"]), environ={})
        assert config.horizon == 12
        assert config.lookback == 48

    def test_environment_seed_wins(self, config_file) -> None:
        args = _parse(["--config", str(config_file), "--seed", "8"])
        assert config_from_args(args, environ={SEED_ENV: "42"}).seed == 42
        assert config_from_args(args, environ={}).seed == 8

    def test_every_key_has_a_flag(self) -> None:
        args = _parse(["--lambda-p", "0.05,0.1", "--train-only-pool", "--ablation"])
        config = config_from_args(args, environ={})
        assert config.lambda_p == (0.05, 0.1)
        assert config.train_only_pool is True
        assert config.ablation is True

    def test_boolean_flags_are_bare(self) -> None:
        config = config_from_args(_parse(["--circular-phase", "--no-train-only-pool"]), environ={})
        assert config.circular_phase is True
        assert config.train_only_pool is False
        args = _parse([])
        assert (args.circular_phase, args.train_only_pool, args.ablation) == (None, None, None)

    def test_invalid_value(self) -> None:
        with pytest.raises(ConfigError):
            build_config(cli_values={"lambda_p": (0.0,)}, environ={})

    def test_bad_environment_seed(self) -> None:
        with pytest.raises(ConfigError):
            build_config(environ={SEED_ENV: "abc"})


class TestPresets:
    """Test suite for benchmark presets."""

    def test_lookup_is_case_insensitive(self) -> None:
        assert get_preset("etth1").name == "ETTh1"

    def test_unknown_preset(self) -> None:
        with pytest.raises(ConfigError):
            get_preset("Sunspots")

    def test_ett_presets_download(self) -> None:
        assert all(PRESETS[name].url for name in ("ETTh1", "ETTh2", "ETTm1", "ETTm2"))

    def test_horizons(self) -> None:
        assert PRESETS["Illness"].horizons == (24, 36, 48, 60)
        assert PRESETS["Traffic"].horizons == (96, 192, 336, 720)
