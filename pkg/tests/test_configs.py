# tests/test_configs.py
import json
import logging

import numpy as np
import pytest

import l1mpc.configs as config_module
from l1mpc.commands.run import default_jobs, default_output_dir
from l1mpc.configs import _resolve_placeholders, env_flag, section
from l1mpc.exceptions import ConfigurationError
from l1mpc.schemas.bench import Scenario
from l1mpc.utils.io import load_document, validate, write_json
from l1mpc.utils.logs import resolve_level


def test_sections():
    assert section("app")["project_name"] == "l1mpc"
    assert section("no_such_block") == {}
    assert section("mpc")["horizon"] == 20


def test_placeholders_keep_referenced_type():
    assert section("l1")["sample_period"] == 0.01
    assert isinstance(section("l1")["sample_period"], float)

    data = {"period": 0.5, "a": "${period}", "b": "every ${period} s", "c": ["${period}"]}
    resolved = _resolve_placeholders(data, data)
    assert resolved["a"] == 0.5
    assert resolved["b"] == "every 0.5 s"
    assert resolved["c"] == [0.5]


@pytest.mark.parametrize(
    "value, expected",
    [(None, False), ("", False), ("1", True), ("true", True), ("Yes", True), ("off", False)],
)
def test_env_flag(monkeypatch, value, expected):
    monkeypatch.setitem(config_module.env, "L1MPC_LOG_JSON", value)
    assert env_flag("L1MPC_LOG_JSON") is expected


def test_env_flag_default(monkeypatch):
    monkeypatch.setitem(config_module.env, "L1MPC_LOG_JSON", None)
    assert env_flag("L1MPC_LOG_JSON", default=True) is True


def test_resolve_level(monkeypatch):
    monkeypatch.setitem(config_module.env, "L1MPC_LOG_LEVEL", None)
    assert resolve_level("debug") == logging.DEBUG
    assert resolve_level() == logging.INFO
    monkeypatch.setitem(config_module.env, "L1MPC_LOG_LEVEL", "warning")
    assert resolve_level() == logging.WARNING
    with pytest.raises(ValueError):
        resolve_level("LOUD")


def test_run_defaults_from_environment(monkeypatch):
    monkeypatch.setitem(config_module.env, "L1MPC_OUTPUT_DIR", "/tmp/bench")
    monkeypatch.setitem(config_module.env, "L1MPC_JOBS", "4")
    assert default_output_dir() == "/tmp/bench"
    assert default_jobs() == 4

    monkeypatch.setitem(config_module.env, "L1MPC_JOBS", "many")
    with pytest.raises(ConfigurationError):
        default_jobs()


def test_validate_maps_to_configuration_error():
    with pytest.raises(ConfigurationError, match="trajectory"):
        validate(Scenario, {"outer": "mpc", "inner": "l1", "trajectory": 0})


def test_load_document_errors(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_document(tmp_path / "absent.json", Scenario)
    broken = tmp_path / "broken.json"
    broken.write_text("[1,")
    with pytest.raises(ConfigurationError, match="malformed"):
        load_document(broken, Scenario)


def test_load_document(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"outer": "pid", "inner": "l1", "trajectory": 2, "seed": 5}))
    scenario = load_document(path, Scenario)
    assert scenario.key == "pid-l1__traj2__off__seed5"


def test_write_json_handles_numpy(tmp_path):
    path = write_json(
        tmp_path / "nested" / "out.json",
        {"array": np.arange(3), "scalar": np.float64(1.5), "where": tmp_path},
    )
    payload = json.loads(path.read_text())
    assert payload == {"array": [0, 1, 2], "scalar": 1.5, "where": str(tmp_path)}
