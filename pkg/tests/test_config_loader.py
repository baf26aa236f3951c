import os

import pytest

from app import constants
from app.config_loader import DEFAULT_CONFIG, load_config
from app.errors import ConfigError
from app.main import _apply_overrides, _parse_args


def write(tmp_path, text):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_defaults_without_a_file():
    cfg = load_config("")
    assert cfg["camera"]["width"] == DEFAULT_CONFIG["camera"]["width"]
    assert cfg["loss"]["tau"] == constants.TAU
    assert cfg["body"]["beta"] == [0.0] * constants.SHAPE_DIM
    assert cfg["runtime"]["workers"] == 1


def test_missing_file_is_an_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.yaml"))


def test_partial_tables_keep_the_other_garments(tmp_path):
    cfg = load_config(write(tmp_path, "loss:\n  tau: {coat: 0.2}\n"))
    assert cfg["loss"]["tau"]["coat"] == 0.2
    assert cfg["loss"]["tau"]["upper"] == constants.TAU["upper"]
    assert cfg["loss"]["lambda_dp"] == constants.LAMBDA_DP


def test_aliases(tmp_path):
    cfg = load_config(write(tmp_path, "camera:\n  w: 64\n  h: 48\nfit:\n  iterations: 12\nbody:\n  gender: female\n"))
    assert (cfg["camera"]["width"], cfg["camera"]["height"]) == (64, 48)
    assert "w" not in cfg["camera"]
    assert cfg["fit"]["max_iterations"] == 12
    assert cfg["body"]["gender_variant"] == "female"


@pytest.mark.parametrize("value", ["auto", "0"])
def test_automatic_workers(tmp_path, value):
    cfg = load_config(write(tmp_path, f"runtime:\n  workers: {value}\n  log_level: debug\n"))
    assert cfg["runtime"]["workers"] is None
    assert cfg["runtime"]["log_level"] == "DEBUG"


def test_short_beta_is_padded(tmp_path):
    cfg = load_config(write(tmp_path, "body:\n  beta: [1.5, -0.5]\n"))
    assert cfg["body"]["beta"] == [1.5, -0.5] + [0.0] * (constants.SHAPE_DIM - 2)
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, f"body:\n  beta: {[0.0] * (constants.SHAPE_DIM + 1)}\n"))


@pytest.mark.parametrize(
    "text",
    [
        "cloth:\n  iso: 0\n",
        "camera:\n  center: [0.0]\n",
        "fit:\n  max_iterations: many\n",
        "- just\n- a list\n",
        "loss: 3\n",
    ],
)
def test_invalid_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_packaged_config_loads():
    path = os.path.join(os.path.dirname(__file__), "..", "app", "config.yaml")
    cfg = load_config(path)
    assert cfg["cloth"]["iso"] == constants.DEFAULT_ISO
    assert cfg["loss"]["d_max"] == constants.D_MAX
    assert cfg["fit"]["ablation"] == "full"


@pytest.mark.parametrize("command", [["synth"], ["fit", "scene"], ["reconstruct", "scene"], ["eval", "scene"]])
def test_extraction_flags_apply_to_every_command(command):
    args = _parse_args(command + ["--resolution", "48", "--iso", "0.01"])
    cfg = _apply_overrides(load_config(""), args)
    assert cfg["cloth"]["resolution"] == 48
    assert cfg["cloth"]["iso"] == 0.01
