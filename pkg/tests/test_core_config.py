from __future__ import annotations

from pathlib import Path

import pytest

from gaugelab.core.config import ConfigError, RunConfig, build_run_config, get_settings, get_settings_snapshot


def _write(tmp_path: Path, text: str) -> str:
    path = tmp_path / "run.env"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_get_settings_defaults(isolated_env: pytest.MonkeyPatch) -> None:
    values = get_settings()
    assert values["solution"] == "ps-lift"
    assert values["r_min"] == 0.5
    assert values["samples"] == 100


def test_get_settings_reads_environment(isolated_env: pytest.MonkeyPatch) -> None:
    isolated_env.setenv("GAUGELAB_SAMPLES", " 40 ")
    isolated_env.setenv("GAUGELAB_SOLUTION", "const-mode")
    values = get_settings()
    assert values["samples"] == 40
    assert values["solution"] == "const-mode"


def test_config_file_overrides_environment(isolated_env: pytest.MonkeyPatch, tmp_path: Path) -> None:
    isolated_env.setenv("GAUGELAB_SAMPLES", "40")
    path = _write(tmp_path, "samples=12\nsolution=linear-mode\ndeterministic=no\n")
    values = get_settings(path)
    assert values["samples"] == 12
    assert values["solution"] == "linear-mode"
    assert values["deterministic"] is False


def test_flags_override_config_file(isolated_env: pytest.MonkeyPatch, tmp_path: Path) -> None:
    path = _write(tmp_path, "samples=12\nr_max=20\n")
    config = build_run_config({"samples": 30, "r_min": None}, path)
    assert isinstance(config, RunConfig)
    assert config.samples == 30
    assert config.r_max == 20.0
    assert config.r_min == 0.5


def test_unknown_config_key(isolated_env: pytest.MonkeyPatch, tmp_path: Path) -> None:
    path = _write(tmp_path, "colour=blue\n")
    with pytest.raises(ConfigError, match="Unknown config key"):
        get_settings(path)


def test_missing_config_file(isolated_env: pytest.MonkeyPatch, tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="not found"):
        get_settings(str(tmp_path / "absent.env"))


@pytest.mark.parametrize(
    ("overrides", "message"),
    [
        ({"r_min": 5.0, "r_max": 2.0}, "radius window"),
        ({"angular_level": 2}, "at least 4"),
        ({"epsilon": 1.5}, "epsilon"),
        ({"solution": "nope"}, "Unknown solution"),
        ({"samples": 1}, "samples"),
    ],
)
def test_invalid_overrides(isolated_env: pytest.MonkeyPatch, overrides: dict, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        build_run_config(overrides)


def test_invalid_boolean(isolated_env: pytest.MonkeyPatch) -> None:
    with pytest.raises(ConfigError, match="Invalid boolean"):
        build_run_config({"deterministic": "maybe"})


def test_get_settings_snapshot_reports_error(isolated_env: pytest.MonkeyPatch) -> None:
    isolated_env.setenv("GAUGELAB_EPSILON", "2")
    snapshot, error = get_settings_snapshot()
    assert snapshot["epsilon"] == 2.0
    assert error is not None
    assert "epsilon" in str(error)


def test_header_items_are_sorted_and_formatted() -> None:
    items = dict(RunConfig(deterministic=False).header_items())
    keys = [key for key, _ in RunConfig().header_items()]
    assert keys == sorted(keys)
    assert items["deterministic"] == "false"
    assert items["r_min"] == "0.5"
