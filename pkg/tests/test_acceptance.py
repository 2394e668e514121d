# tests/test_acceptance.py
"""Closed-loop acceptance runs on the default trajectories. Run with `pytest -m slow`."""
from pathlib import Path

import numpy as np
import pytest

from l1mpc.schemas.bench import Scenario, Suite
from l1mpc.services import bench_service, suite_service, trajectory_service
from l1mpc.utils.io import load_document

pytestmark = pytest.mark.slow

SUITES = Path(__file__).resolve().parents[1] / "suites"
GUST = {"kind": "gust_region", "magnitude": 1.5, "direction": [0.0, 1.0, 0.0]}


def outcome(report, kind):
    return next(a for a in report.assertions if a.kind == kind)


def test_predictive_stack_ranks_first():
    report = suite_service.run_suite(load_document(SUITES / "ranking.json", Suite), jobs=2)
    assert report.failed_cells == []
    assert outcome(report, "ranking").passed, outcome(report, "ranking").detail
    assert outcome(report, "second_difference_bound").passed
    assert report.exit_code == 0


def test_adaptive_inner_loop_halves_wind_increase():
    report = suite_service.run_suite(load_document(SUITES / "wind.json", Suite), jobs=2)
    assert report.failed_cells == []
    assert outcome(report, "wind_ratio").passed, outcome(report, "wind_ratio").detail
    assert outcome(report, "second_difference_bound").passed


def test_estimation_error_shrinks_with_adaptation_gain():
    worst = []
    for gain in (1e2, 1e3, 1e4):
        sc = Scenario(
            outer="mpc", inner="l1", trajectory=1, wind=GUST, wind_name="gust", l1={"adaptation_gain": gain}
        )
        result = bench_service.run_scenario(sc)
        assert result.ok, result.detail
        worst.append(max(result.max_estimation_error))
    assert np.all(np.isfinite(worst))
    assert worst[0] > worst[1] > worst[2]
    assert worst[0] / worst[2] >= 3.0


def test_output_stays_close_to_ideal_model():
    sc = load_document(SUITES / "scenario_line_gust.json", Scenario)
    result = bench_service.run_scenario(sc)
    assert result.ok, result.detail
    trajectory = trajectory_service.make_trajectory(sc.trajectory, sc.trajectory_params)
    amplitude = float(np.max(np.ptp(trajectory.positions, axis=0)))
    assert result.ideal_rms <= 0.05 * amplitude
