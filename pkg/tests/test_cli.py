# tests/test_cli.py
import json
import logging

import pytest
from click.testing import CliRunner

from l1mpc.main import cli


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "l1mpc" in result.output


def test_list_trajectories_json(runner):
    result = runner.invoke(cli, ["--log-level", "ERROR", "list-trajectories", "--json"])
    assert result.exit_code == 0
    listing = json.loads(result.output)
    assert [item["id"] for item in listing] == [1, 2, 3, 4, 5]
    assert all(item["max_speed"] <= 2.0 for item in listing)


def test_list_trajectories_table(runner):
    result = runner.invoke(cli, ["list-trajectories"])
    assert result.exit_code == 0
    assert "figure_eight" in result.output


def test_unknown_log_level(runner):
    result = runner.invoke(cli, ["--log-level", "LOUD", "list-trajectories"])
    assert result.exit_code == 2


@pytest.mark.parametrize(
    "args",
    [
        ["run"],
        ["run", "--scenario", "a.json", "--suite", "b.json"],
        ["run", "--scenario", "missing.json"],
        ["run", "--suite", "suite.json"],
    ],
)
def test_run_configuration_errors_exit_2(runner, args):
    with runner.isolated_filesystem():
        result = runner.invoke(cli, ["--log-level", "ERROR"] + args)
    assert result.exit_code == 2
    assert "error" in result.output


def test_run_rejects_malformed_scenario(runner, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"outer": "mpc", "inner": "l1", "trajectory": 9}))

    for path in (broken, invalid):
        result = runner.invoke(cli, ["--log-level", "ERROR", "run", "--scenario", str(path)])
        assert result.exit_code == 2


def test_check_norm_condition_without_nonlinearity(runner, tmp_path):
    config = tmp_path / "norm.json"
    config.write_text(json.dumps({"lipschitz": 0.0}))
    result = runner.invoke(
        cli, ["--log-level", "ERROR", "check-norm-condition", "--config", str(config)]
    )
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["satisfied"] is True
    assert report["product"] == 0.0
    assert len(report["per_axis_g_norm"]) == 3


def test_check_norm_condition_fails_for_large_lipschitz(runner, tmp_path):
    config = tmp_path / "norm.json"
    config.write_text(json.dumps({"lipschitz": 1e6}))
    result = runner.invoke(
        cli, ["--log-level", "ERROR", "check-norm-condition", "--config", str(config)]
    )
    assert result.exit_code == 1
    assert json.loads(result.output)["satisfied"] is False


def test_suite_with_invalid_defaults_exits_2(runner, tmp_path):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"stacks": ["pid-l1"], "defaults": {"l1": {"adaptation_gain": 1e6}}}))
    result = runner.invoke(
        cli, ["--log-level", "ERROR", "run", "--suite", str(suite), "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == 2
    assert "adaptation" in result.output
    assert not (tmp_path / "out" / "summary.csv").exists()
