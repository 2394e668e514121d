# tests/test_bench.py
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from l1mpc.exceptions import (
    ConfigurationError,
    InfeasibleProblemError,
    LtiError,
    MetricError,
    NonConvexProblemError,
)
from l1mpc.models.bench import SERIES_COLUMNS, columns
from l1mpc.schemas.bench import Scenario, Suite, parse_stack
from l1mpc.schemas.plant import WindModel
from l1mpc.services import bench_service, mpc_service, trajectory_service


# --- Metric ---
def test_constant_offset_error():
    r2 = np.zeros((40, 3))
    y2 = r2.copy()
    y2[:, 0] = 0.3
    assert bench_service.compute_avg_error(r2, y2) == 0.3


def test_zero_error():
    r2 = np.random.default_rng(0).standard_normal((25, 3))
    assert bench_service.compute_avg_error(r2, r2) == 0.0


def test_half_offset_error():
    r2 = np.zeros((40, 3))
    y2 = r2.copy()
    y2[:20, 0] = 0.3
    assert bench_service.compute_avg_error(r2, y2) == pytest.approx(0.15, abs=1e-15)


def test_axis_rms():
    r2 = np.zeros((4, 3))
    y2 = np.array([[1.0, 0.0, 2.0]] * 4)
    assert np.allclose(bench_service.compute_axis_rms(r2, y2), [1.0, 0.0, 2.0])


def test_metric_rejects_empty_and_mismatched_series():
    with pytest.raises(MetricError):
        bench_service.compute_avg_error(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(MetricError):
        bench_service.compute_avg_error(np.zeros((3, 3)), np.zeros((4, 3)))


# --- Scenario documents ---
def test_scenario_key_and_stack(make_scenario):
    sc = make_scenario("lqr", "l1", 3, seed=4, wind_name="gust")
    assert sc.stack == "lqr-l1"
    assert sc.key == "lqr-l1__traj3__gust__seed4"
    assert make_scenario().mpc_decimation == 1
    assert make_scenario(mpc={"sample_period": 0.05}).mpc_decimation == 5


def test_scenario_rejects_inconsistent_periods(make_scenario):
    with pytest.raises(ValidationError, match="multiple"):
        make_scenario(mpc={"sample_period": 0.033})
    with pytest.raises(ValidationError):
        make_scenario(l1={"sample_period": 0.02, "adaptation_gain": 100.0})


def test_scenario_rejects_bad_labels_and_unknown_fields(make_scenario):
    with pytest.raises(ValidationError):
        make_scenario(wind_name="strong_gust")
    with pytest.raises(ValidationError):
        make_scenario(colour="red")


def test_partial_inner_pid_fills_from_inner_defaults(make_scenario):
    sc = make_scenario("mpc", "pid", pid_inner={"kp": [0.5, 0.5, 1.0]})
    assert sc.pid_inner.kp == [0.5, 0.5, 1.0]
    assert sc.pid_inner.output_limit == [0.8, 0.8, 4.0]


def test_parse_stack():
    assert parse_stack("MPC-L1") == ("mpc", "l1")
    with pytest.raises(ValueError):
        parse_stack("mpc-lqr")


def test_suite_expansion(short_params):
    suite = Suite(
        stacks=["pid-l1", "mpc-l1"],
        trajectories=[1, 2],
        winds={"off": {"kind": "off"}, "gust": {"kind": "gust_region"}},
        seeds=[0, 1],
        defaults={"trajectory_params": short_params.model_dump()},
    )
    scenarios = suite.expand()
    assert len(scenarios) == 2 * 2 * 2 * 2
    keys = [sc.key for sc in scenarios]
    assert keys == sorted(keys)
    assert all(sc.trajectory_params == short_params for sc in scenarios)
    assert {sc.seed for sc in suite.expand(seed=9)} == {9}
    assert len(suite.expand(seed=9)) == 8


def test_suite_rejects_unknown_stack():
    with pytest.raises(ValidationError):
        Suite(stacks=["mpc-foo"])


# --- Gust placement ---
def test_gust_without_region_is_centered_mid_trajectory(short_params):
    trajectory = trajectory_service.make_trajectory(2, short_params)
    placed = bench_service._place_gust(WindModel(kind="gust_region"), trajectory, 0)
    assert np.allclose(placed.region.center, trajectory.positions[len(trajectory) // 2])
    turbulent = bench_service._place_gust(WindModel(kind="turbulent", noise_seed=3), trajectory, 4)
    assert turbulent.noise_seed == 7


# --- Closed loop ---
def test_predictive_stack_beats_standing_still(make_scenario):
    sc = make_scenario("mpc", "l1", 1)
    result = bench_service.run_scenario(sc)
    assert result.ok
    trajectory = trajectory_service.make_trajectory(1, sc.trajectory_params)
    assert len(result.series) == len(trajectory)
    assert list(result.series.columns) == SERIES_COLUMNS
    assert math.isfinite(result.avg_error)
    assert result.avg_error < bench_service.hover_only_error(trajectory)
    assert result.second_difference_excess <= 1e-9
    assert result.qp_iterations > 0
    assert result.ideal_rms is not None


def test_heavier_tracking_weight_never_increases_the_error(make_scenario, exact_plant):
    errors = [
        bench_service.run_scenario(make_scenario("mpc", "l1", 1, mpc={"q": q}, plant=exact_plant)).avg_error
        for q in (1.0, 17.0, 100.0)
    ]
    assert errors[1] <= errors[0] + 1e-9
    assert errors[2] <= errors[1] + 1e-9


@pytest.mark.parametrize("outer", ["pid", "lqr", "none"])
def test_feedback_stacks_run(make_scenario, outer):
    result = bench_service.run_scenario(make_scenario(outer, "l1", 2))
    assert result.ok
    assert result.r_max is None
    assert result.max_estimation_error is not None
    assert np.all(np.isfinite(result.series.to_numpy()))


def test_csv_recomputes_the_metric_exactly(make_scenario, tmp_path):
    result = bench_service.run_scenario(make_scenario("pid", "l1", 1))
    path = bench_service.write_series_csv(result.series, tmp_path / "run.csv")
    series = bench_service.read_series_csv(path)
    assert list(series.columns) == SERIES_COLUMNS
    assert bench_service.avg_error_from_series(series) == result.avg_error


def test_same_scenario_gives_identical_csv_bytes(make_scenario, tmp_path):
    sc = make_scenario("mpc", "l1", 3, wind={"kind": "turbulent", "magnitude": 0.5}, wind_name="turb")
    first = bench_service.write_series_csv(bench_service.run_scenario(sc).series, tmp_path / "a.csv")
    second = bench_service.write_series_csv(bench_service.run_scenario(sc).series, tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()


def test_empty_wind_window_equals_no_wind(make_scenario):
    calm = bench_service.run_scenario(make_scenario("pid", "l1", 1))
    closed = bench_service.run_scenario(
        make_scenario(
            "pid",
            "l1",
            1,
            wind={"kind": "constant", "magnitude": 2.0, "activation_window": (1.0, 1.0)},
            wind_name="closed",
        )
    )
    pd.testing.assert_frame_equal(calm.series, closed.series)


def test_wind_column_follows_the_activation_window(make_scenario):
    sc = make_scenario(
        "pid", "l1", 1, wind={"kind": "constant", "magnitude": 1.0, "activation_window": (1.0, 2.0)},
        wind_name="window",
    )
    series = bench_service.run_scenario(sc).series
    force = np.linalg.norm(series[columns("wind")].to_numpy(), axis=1)
    t = series["t"].to_numpy()
    # plant time accumulates step by step, so the edges are left out
    assert np.allclose(force[(t > 1.0 + 1e-6) & (t < 2.0 - 1e-6)], 1.0)
    assert np.allclose(force[t < 1.0 - 1e-6], 0.0)
    assert np.allclose(force[t > 2.0 + 1e-6], 0.0)


@pytest.mark.parametrize("outer", ["pid", "lqr", "mpc"])
def test_hover_prefix_stays_on_the_start_point(make_scenario, short_params, outer):
    params = short_params.model_copy(update={"hover_duration": 1.5})
    sc = make_scenario(outer, "l1", 1, trajectory_params=params)
    result = bench_service.run_scenario(sc)
    trajectory = trajectory_service.make_trajectory(1, sc.trajectory_params)
    # samples before the motion enters the predictive horizon
    quiet = trajectory.hover_samples - sc.mpc.horizon * sc.mpc_decimation
    r2 = result.series[columns("r2")].to_numpy()[:quiet]
    y2 = result.series[columns("y2")].to_numpy()[:quiet]
    assert np.max(np.linalg.norm(r2 - y2, axis=1)) <= 0.02


def test_runtime_failure_keeps_partial_series(make_scenario, monkeypatch):
    calls = {"n": 0}
    solve = mpc_service.solve_qp

    def flaky(spec, max_iterations=None):
        calls["n"] += 1
        if calls["n"] > 30:
            raise InfeasibleProblemError("infeasible")
        return solve(spec, max_iterations=max_iterations)

    monkeypatch.setattr(mpc_service, "solve_qp", flaky)
    sc = make_scenario("mpc", "l1", 1)
    result = bench_service.run_scenario(sc)
    assert not result.ok
    assert "InfeasibleProblemError" in result.detail
    # ten re-plans of three axes, one sample each
    assert len(result.series) == 10
    assert math.isfinite(result.avg_error)
    assert result.ideal_rms is None


@pytest.mark.parametrize(
    "error", [NonConvexProblemError("QP hessian is not positive definite"), LtiError("bad window")]
)
def test_solver_errors_inside_the_loop_fail_only_the_cell(make_scenario, monkeypatch, error):
    solve = mpc_service.solve_qp
    calls = {"n": 0}

    def breaking(spec, max_iterations=None):
        calls["n"] += 1
        if calls["n"] > 6:
            raise error
        return solve(spec, max_iterations=max_iterations)

    monkeypatch.setattr(mpc_service, "solve_qp", breaking)
    result = bench_service.run_scenario(make_scenario("mpc", "l1", 1))
    assert result.status == "failed"
    assert type(error).__name__ in result.detail
    assert len(result.series) == 2


def test_identified_plan_starts_on_the_hover_point(make_scenario):
    sc = make_scenario("mpc", "pid", 1)
    result = bench_service.run_scenario(sc)
    assert not result.series.empty
    start = np.asarray(sc.trajectory_params.hover_point)
    r2cmd = result.series[columns("r2cmd")].to_numpy()
    assert np.allclose(r2cmd[0], start, rtol=0.0, atol=1e-9)


def test_configuration_errors_propagate(make_scenario, short_params):
    fast = short_params.model_copy(update={"max_speed": 0.1})
    with pytest.raises(ConfigurationError):
        bench_service.run_scenario(make_scenario("pid", "l1", 2, trajectory_params=fast))
