# l1mpc/services/bench_service.py
import functools
import logging
import math
import time
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from l1mpc.exceptions import L1MpcError, MetricError
from l1mpc.models.baselines import IdentifiedModel, StepRecord
from l1mpc.models.bench import SERIES_COLUMNS, ScenarioResult, Trajectory, columns
from l1mpc.models.lti import LtiSystem
from l1mpc.models.mpc import MpcProblem
from l1mpc.models.plant import VehicleState
from l1mpc.schemas.bench import Scenario
from l1mpc.schemas.plant import GustRegion, WindModel
from l1mpc.services import baseline_service, l1_service, lti_service, mpc_service
from l1mpc.services.plant_service import QuadrotorSimulator, attitude_transform
from l1mpc.services.trajectory_service import make_trajectory

logger = logging.getLogger(__name__)


# --- Metrics ---
def _paired(r2, y2):
    r2 = np.asarray(r2, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if r2.shape != y2.shape:
        raise MetricError(f"reference and position series differ in shape: {r2.shape} vs {y2.shape}")
    if r2.ndim != 2 or len(r2) == 0:
        raise MetricError("average error needs a non-empty (N, axes) series")
    return r2, y2


def compute_avg_error(r2, y2) -> float:
    """e = (1/N) Σ_k ‖r2(k) - y2(k)‖₂."""
    r2, y2 = _paired(r2, y2)
    norms = np.sqrt(np.sum((r2 - y2) ** 2, axis=1))
    return math.fsum(norms.tolist()) / len(norms)


def compute_axis_rms(r2, y2) -> np.ndarray:
    r2, y2 = _paired(r2, y2)
    return np.sqrt(np.mean((r2 - y2) ** 2, axis=0))


def hover_only_error(trajectory: Trajectory) -> float:
    """Error of a vehicle that ignores the reference and stays at the start point."""
    still = np.tile(trajectory.start, (len(trajectory), 1))
    return compute_avg_error(trajectory.positions, still)


def avg_error_from_series(series: pd.DataFrame) -> float:
    return compute_avg_error(series[columns("r2")].to_numpy(), series[columns("y2")].to_numpy())


# --- CSV ---
def write_series_csv(series: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    series.to_csv(path, index=False, columns=SERIES_COLUMNS)
    return path


def read_series_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


# --- Controller layers ---
class _L1Inner:
    def __init__(self, sc: Scenario):
        self.controller = l1_service.L1AdaptiveController(sc.l1)
        self.controller.reset(np.zeros(3))
        self.yhat1 = np.zeros(3)

    def command(self, y2, y1, r2cmd) -> np.ndarray:
        self.yhat1 = self.controller.predicted_output
        return self.controller.step(y1, r2cmd, y2)

    @property
    def sigma_hat(self) -> np.ndarray:
        return self.controller.sigma_hat


class _PidInner:
    """Position PID straight onto the attitude-level input."""

    def __init__(self, sc: Scenario):
        self.controller = baseline_service.PidController(sc.pid_inner)
        self.yhat1 = np.zeros(3)
        self.sigma_hat = np.zeros(3)

    def command(self, y2, y1, r2cmd) -> np.ndarray:
        return self.controller.step(np.asarray(r2cmd) - np.asarray(y2))


class _NoOuter:
    def __init__(self, trajectory: Trajectory):
        self.trajectory = trajectory

    def reference(self, k: int, y2, y1) -> np.ndarray:
        return self.trajectory.positions[k]


class _PidOuter(_NoOuter):
    def __init__(self, trajectory: Trajectory, sc: Scenario):
        super().__init__(trajectory)
        self.controller = baseline_service.PidController(sc.pid_outer)

    def reference(self, k: int, y2, y1) -> np.ndarray:
        target = self.trajectory.positions[k]
        return target + self.controller.step(target - np.asarray(y2))


class _LqrOuter(_NoOuter):
    def __init__(self, trajectory: Trajectory, sc: Scenario, models: Sequence[LtiSystem]):
        super().__init__(trajectory)
        self.controller = baseline_service.LqrController(sc.lqr, models)

    def reference(self, k: int, y2, y1) -> np.ndarray:
        return self.controller.step(
            self.trajectory.positions[k], self.trajectory.velocities[k], y2, y1
        )


class _MpcOuter(_NoOuter):
    """
    Re-plans every `decimation` samples and holds the first move in between.
    Planning runs in the model's coordinates: positions, targets and inputs
    are shifted by -offset and the command by +offset.
    """

    def __init__(
        self,
        trajectory: Trajectory,
        sc: Scenario,
        models: Sequence[LtiSystem],
        offset: Optional[np.ndarray] = None,
    ):
        super().__init__(trajectory)
        self.problems = [MpcProblem.from_config(sc.mpc, model) for model in models]
        self.offset = np.zeros(3) if offset is None else np.asarray(offset, dtype=float)
        self.planner = mpc_service.MpcPlanner(self.problems, trajectory.start - self.offset)
        self.decimation = sc.mpc_decimation
        self.horizon = sc.mpc.horizon
        self.order = models[0].order
        self.current = trajectory.start.copy()

    def reference(self, k: int, y2, y1) -> np.ndarray:
        if k % self.decimation == 0:
            position = np.asarray(y2) - self.offset
            states = [np.array([position[i], y1[i]])[: self.order] for i in range(3)]
            targets = self.trajectory.window(k, self.decimation, self.horizon + 1) - self.offset
            self.current = self.planner.step(states, targets) + self.offset
        return self.current

    def second_difference(self) -> tuple:
        """(max |Δ²r|/Ts², max |Δ²r| - r_max Ts²) over the applied sequence."""
        ts = self.problems[0].sample_period
        worst = self.planner.max_second_difference()
        return worst, (worst - self.problems[0].r_max) * ts ** 2


# --- Models for the predictive and LQR layers ---
def ideal_models(sc: Scenario, period: float) -> List[LtiSystem]:
    """Per-axis ZOH discretization of the extended-L1 ideal model, state [position; velocity]."""
    return [
        lti_service.discretize_zoh(l1_service.ideal_axis_model(sc.l1, i), period)
        for i in range(3)
    ]


def pid_step_experiment(sc: Scenario, period: float):
    """Step experiment on the plant under the inner PID, recorded at `period` around hover."""
    ts = sc.sample_period
    stride = int(round(period / ts))
    hover = np.asarray(sc.trajectory_params.hover_point, dtype=float)

    def experiment(axis: int, step_size: float, duration: float) -> StepRecord:
        sim = QuadrotorSimulator(
            sc.plant, WindModel(kind="off"), VehicleState.hover(hover, yaw=sc.plant.initial_yaw)
        )
        pid = baseline_service.PidController(sc.pid_inner)
        settle = stride * int(round(sc.identification.settle_time / period))
        reference, position, velocity = [], [], []
        for k in range(int(round(duration / ts)) + 1):
            state = sim.state
            target = hover.copy()
            if k >= settle:
                target[axis] += step_size
            if k % stride == 0:
                reference.append(target[axis] - hover[axis])
                position.append(state.position[axis] - hover[axis])
                velocity.append(state.velocity[axis])
            u = pid.step(target - state.position)
            sim.advance(attitude_transform(u, state.yaw, sc.plant), ts)
        return StepRecord(
            sample_period=period,
            reference=np.array(reference),
            position=np.array(position),
            velocity=np.array(velocity),
        )

    return experiment


@functools.lru_cache(maxsize=32)
def _identified(payload: str, period: float) -> IdentifiedModel:
    sc = Scenario.model_validate_json(payload)
    cfg = sc.identification
    logger.info(f"identifying the pid inner loop at {period} s sampling")
    return baseline_service.identify_axes(
        pid_step_experiment(sc, period), 3, cfg.step_size, cfg.duration, cfg.order
    )


def identified_models(sc: Scenario, period: float) -> IdentifiedModel:
    """Cached per (plant, inner PID, identification settings, hover point, period)."""
    # only the fields the experiment depends on enter the cache key
    neutral = Scenario(
        outer="none",
        inner="pid",
        trajectory=1,
        sample_period=sc.sample_period,
        l1=sc.l1,
        pid_outer=sc.pid_outer,
        pid_inner=sc.pid_inner,
        lqr=sc.lqr,
        identification=sc.identification,
        plant=sc.plant,
        trajectory_params={
            "hover_point": sc.trajectory_params.hover_point,
            "sample_period": sc.trajectory_params.sample_period,
        },
    )
    return _identified(neutral.model_dump_json(), period)


def _layer_models(sc: Scenario, period: float):
    """(axis models, fit residual, operating point the models are expressed around)."""
    if sc.inner == "l1":
        return ideal_models(sc, period), None, np.zeros(3)
    identified = identified_models(sc, period)
    hover = np.asarray(sc.trajectory_params.hover_point, dtype=float)
    return identified.axes, identified.fit_residual, hover


def _place_gust(wind: WindModel, trajectory: Trajectory, seed: int) -> WindModel:
    update = {}
    if wind.kind == "gust_region" and wind.region is None:
        update["region"] = GustRegion(center=tuple(trajectory.positions[len(trajectory) // 2]))
    if wind.kind == "turbulent":
        update["noise_seed"] = wind.noise_seed + seed
    return wind.model_copy(update=update) if update else wind


# --- Scenario ---
def run_scenario(sc: Scenario) -> ScenarioResult:
    """
    Closed loop at sample_period: measure, outer layer, inner layer, attitude
    transform, advance the plant. Runtime failures end the run early and are
    recorded with the rows gathered so far.
    """
    started = time.perf_counter()
    trajectory = make_trajectory(sc.trajectory, sc.trajectory_params)
    wind = _place_gust(sc.wind, trajectory, sc.seed)
    ts = sc.sample_period
    n = len(trajectory)
    rows = np.zeros((n, len(SERIES_COLUMNS)))
    recorded = 0
    status, detail = "ok", None
    outer = inner = None
    fit_residual = None
    clamped = 0
    running = False

    try:
        if sc.outer == "mpc":
            models, fit_residual, offset = _layer_models(sc, sc.mpc.sample_period)
            outer = _MpcOuter(trajectory, sc, models, offset)
        elif sc.outer == "lqr":
            # error feedback, so the operating point cancels
            models, fit_residual, _ = _layer_models(sc, ts)
            outer = _LqrOuter(trajectory, sc, models)
        elif sc.outer == "pid":
            outer = _PidOuter(trajectory, sc)
        else:
            outer = _NoOuter(trajectory)
        inner = _L1Inner(sc) if sc.inner == "l1" else _PidInner(sc)

        sim = QuadrotorSimulator(
            sc.plant, wind, VehicleState.hover(trajectory.start, yaw=sc.plant.initial_yaw)
        )
        rng = np.random.default_rng(sc.seed)
        noise = sc.plant.position_noise_std

        running = True
        for k in range(n):
            state = sim.state
            y2, y1 = state.position, state.velocity
            y2_meas = y2 + rng.normal(0.0, noise, 3) if noise > 0 else y2
            r2cmd = outer.reference(k, y2_meas, y1)
            u = inner.command(y2_meas, y1, r2cmd)
            cmd = attitude_transform(u, state.yaw, sc.plant)
            clamped += cmd.clamped
            rows[k] = np.concatenate(
                [
                    [k * ts],
                    trajectory.positions[k],
                    r2cmd,
                    y2,
                    y1,
                    inner.yhat1,
                    inner.sigma_hat,
                    u,
                    sim.force_now(),
                ]
            )
            recorded = k + 1
            if k < n - 1:
                sim.advance(cmd, ts)
    except (L1MpcError, np.linalg.LinAlgError) as e:
        # setup errors other than runtime failures are configuration problems
        if not running and isinstance(e, L1MpcError) and e.exit_code != 3:
            raise
        status, detail = "failed", f"{type(e).__name__}: {e}"
        logger.error(f"scenario {sc.key} failed at sample {recorded}: {detail}")

    series = pd.DataFrame(rows[:recorded], columns=SERIES_COLUMNS)
    result = ScenarioResult(
        key=sc.key,
        stack=sc.stack,
        trajectory=sc.trajectory,
        wind_name=sc.wind_name,
        seed=sc.seed,
        status=status,
        detail=detail,
        series=series,
        identification_residual=fit_residual,
        clamped_commands=clamped,
    )
    if recorded:
        result.avg_error = avg_error_from_series(series)
        result.axis_rms = compute_axis_rms(
            series[columns("r2")].to_numpy(), series[columns("y2")].to_numpy()
        ).tolist()
    if isinstance(inner, _L1Inner):
        result.max_estimation_error = inner.controller.max_estimation_error.tolist()
        result.projection_saturations = inner.controller.state.saturation_count
        if status == "ok":
            result.ideal_rms = ideal_tracking_rms(result, sc)
    if isinstance(outer, _MpcOuter):
        result.r_max = sc.mpc.r_max
        result.max_second_difference, result.second_difference_excess = outer.second_difference()
        result.qp_iterations = outer.planner.iterations
    if result.projection_saturations:
        logger.warning(f"scenario {sc.key}: projection saturated {result.projection_saturations} times")
    if clamped:
        logger.warning(f"scenario {sc.key}: {clamped} attitude command channels clamped")
    result.runtime = time.perf_counter() - started
    logger.info(
        f"scenario {sc.key} {status}: e={result.avg_error:.4f} m over {recorded} samples "
        f"in {result.runtime:.2f}s"
    )
    return result


def ideal_tracking_rms(result: ScenarioResult, sc: Scenario) -> Optional[float]:
    """RMS distance between the recorded positions and the ideal model driven by r2cmd."""
    if sc.inner != "l1" or result.series.empty:
        return None
    ideal = l1_service.simulate_ideal_response(sc.l1, result.series[columns("r2cmd")].to_numpy())
    gap = result.series[columns("y2")].to_numpy() - ideal
    return float(np.sqrt(np.mean(np.sum(gap ** 2, axis=1))))
