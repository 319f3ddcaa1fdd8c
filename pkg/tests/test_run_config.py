"""Tests for run configuration loading, overrides and environment settings."""

import pytest
from pydantic import ValidationError

from macroipm.errors import (
    ConfigParseError,
    ConfigValidationError,
    MissingArtifactError,
)
from macroipm.run_config import (
    CONFIG_DIR,
    InterfaceSpec,
    RunConfig,
    apply_overrides,
    config_hash,
    list_presets,
    load_config,
    parse_config,
)
from macroipm.settings import Settings, get_settings


def test_presets_are_listed():
    assert list_presets() == ["cos", "flat", "mu09"]


def test_every_preset_validates():
    for name in list_presets():
        config = load_config(CONFIG_DIR / f"{name}.yaml")
        assert config.name == name
        assert config.output_times[-1] <= config.horizon


def test_flat_preset(flat_preset):
    config = load_config(flat_preset)
    assert config.interface == "flat"
    assert config.build_graph().is_flat
    assert config.output_times == [0.025, 0.05, 0.075, 0.1]
    assert config.jko.n_cells == 128


def test_defaults_fill_every_section():
    config = parse_config({})
    assert config.levelset.n_phys == 256
    assert config.output_times == [config.horizon]
    assert config.tolerances.compare_l1 == 0.05


def test_overrides_are_validated(flat_preset):
    config = load_config(flat_preset, ["levelset.n_phys=64", "alpha=0.3", "output_times=[0.1]"])
    assert config.levelset.n_phys == 64
    assert config.alpha == 0.3
    assert config.output_times == [0.1]


def test_override_does_not_touch_the_input():
    raw = {"levelset": {"n2": 9}}
    data = apply_overrides(raw, ["levelset.n2=11"])
    assert data["levelset"]["n2"] == 11
    assert raw["levelset"]["n2"] == 9


def test_malformed_override():
    with pytest.raises(ConfigValidationError):
        parse_config({}, ["alpha"])
    with pytest.raises(ConfigValidationError):
        parse_config({"name": "x"}, ["name.sub=1"])


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"levelset": {"n_phys": 100}}, "levelset.n_phys"),
        ({"levelset": {"n2": 8}}, "levelset.n2"),
        ({"eulerian": {"n_x2": 7}}, "eulerian.n_x2"),
        ({"fv": {"n_x2": 8}}, "fv.n_x2"),
        ({"fv": {"cfl": 1.5}}, "fv.cfl"),
        ({"jko": {"n_cells": 7}}, "jko.n_cells"),
        ({"alpha": 1.0}, "alpha"),
        ({"mu": 2.0}, "mu"),
        ({"horizon": 0.0}, "horizon"),
        ({"interface": "sin(0.1)"}, "interface"),
        ({"colour": "red"}, "colour"),
    ],
)
def test_invalid_field_is_named(raw, field):
    with pytest.raises(ConfigValidationError) as exc_info:
        parse_config(raw)
    assert exc_info.value.field == field
    assert str(exc_info.value).startswith(f"{field}:")
    assert exc_info.value.exit_code == 2


def test_mode_count_must_fit_the_grid():
    with pytest.raises(ConfigValidationError) as exc_info:
        parse_config({"levelset": {"n_modes": 16, "n_phys": 32}})
    assert exc_info.value.field == "levelset"


def test_output_times_must_lie_in_the_horizon():
    with pytest.raises(ConfigValidationError) as exc_info:
        parse_config({"horizon": 0.1, "output_times": [0.05, 0.2]})
    assert exc_info.value.field == "config"
    config = parse_config({"horizon": 0.1, "output_times": [0.1, 0.05]})
    assert config.output_times == [0.05, 0.1]


def test_cosine_interface():
    gamma = parse_config({"interface": "cos(0.1, 2)"}).build_graph()
    assert gamma.n_modes == 2
    assert gamma.max_abs() == pytest.approx(0.1)


def test_explicit_coefficients():
    config = parse_config({"interface": {"coefficients": [[1, 0.05, 0.0]]}})
    assert isinstance(config.interface, InterfaceSpec)
    assert config.build_graph().max_abs() == pytest.approx(0.1)


def test_coefficients_must_describe_a_real_graph():
    with pytest.raises(ConfigValidationError) as exc_info:
        parse_config({"interface": {"coefficients": [[1, 0.05, 0.0], [-1, 0.04, 0.0]]}})
    assert exc_info.value.field == "interface"
    with pytest.raises(ConfigValidationError):
        parse_config({"interface": {"coefficients": [[1, 0.05, 0.0], [1, 0.05, 0.0]]}})


def test_missing_file(tmp_path):
    with pytest.raises(MissingArtifactError) as exc_info:
        load_config(tmp_path / "nope.yaml")
    assert exc_info.value.exit_code == 4


def test_yaml_syntax_error_names_the_line(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("name: broken\nlevelset:\n  n2: [1, 2\n")
    with pytest.raises(ConfigParseError) as exc_info:
        load_config(path)
    assert str(exc_info.value).startswith(f"{path}:")
    assert exc_info.value.exit_code == 2


def test_top_level_must_be_a_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigParseError):
        load_config(path)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_config(path) == RunConfig()


def test_config_hash(flat_preset):
    a = load_config(flat_preset)
    b = load_config(flat_preset)
    c = load_config(flat_preset, ["alpha=0.4"])
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)
    assert config_hash(a).startswith("sha256:")
    assert len(config_hash(a)) == len("sha256:") + 16


def test_half_height():
    assert parse_config({"horizon": 0.1}).half_height() == 4.0
    assert parse_config({"horizon": 2.0, "output_times": [2.0]}).half_height() == pytest.approx(5.0)
    fixed = parse_config({"eulerian": {"half_height": 3.0}})
    assert fixed.half_height() == 3.0
    assert fixed.fv_half_height() == 3.0
    assert parse_config({"fv": {"half_height": 2.5}}).fv_half_height() == 2.5


def test_output_dir(tmp_path):
    assert parse_config({"name": "a"}).resolve_output_dir(tmp_path) == tmp_path / "a"
    explicit = parse_config({"output_dir": str(tmp_path / "here")})
    assert explicit.resolve_output_dir("ignored") == tmp_path / "here"


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("MACROIPM_WORKERS", "4")
    monkeypatch.setenv("MACROIPM_LOG_LEVEL", "DEBUG")
    settings = Settings()
    assert settings.workers == 4
    assert settings.log_level == "DEBUG"
    assert settings.output_root == "runs"


def test_settings_reject_zero_workers(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("MACROIPM_WORKERS", "0")
    with pytest.raises(ValidationError):
        Settings()


def test_settings_are_cached(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    get_settings.cache_clear()
    try:
        assert get_settings() is get_settings()
    finally:
        get_settings.cache_clear()
