# l1mpc/services/tuning_service.py
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from l1mpc.configs import section
from l1mpc.exceptions import ConfigurationError, L1MpcError
from l1mpc.schemas.bench import Scenario, SuiteTuning, merge_settings
from l1mpc.services import baseline_service, bench_service
from l1mpc.utils.io import load_document, write_json

logger = logging.getLogger(__name__)

TUNING_DEFAULTS = section("tuning")


class TuningResult(BaseModel):
    stack: Literal["pid-l1", "lqr-l1"]
    trajectory: int
    iterations: int
    parameters: Dict[str, float]
    avg_error: float
    initial_error: float
    history: List[float] = Field(default_factory=list)
    overrides: dict = Field(default_factory=dict)


def _pid_parameters(sc: Scenario) -> Tuple[List[str], np.ndarray]:
    # one gain triple shared by the three axes
    cfg = sc.pid_outer
    return ["kp", "ki", "kd"], np.array([cfg.kp[0], cfg.ki[0], cfg.kd[0]])


def _pid_overrides(x: np.ndarray) -> dict:
    return {"pid_outer": {"kp": float(x[0]), "ki": float(x[1]), "kd": float(x[2])}}


def _lqr_parameters(sc: Scenario) -> Tuple[List[str], np.ndarray]:
    cfg = sc.lqr
    return (
        ["position_weight", "velocity_weight", "integral_weight", "input_weight"],
        np.array(
            [
                cfg.state_weights[0][0],
                cfg.state_weights[1][1],
                cfg.integral_weight[0],
                cfg.input_weight[0][0],
            ]
        ),
    )


def _lqr_overrides(x: np.ndarray) -> dict:
    return {
        "lqr": {
            "state_weights": [[float(x[0]), 0.0], [0.0, float(x[1])]],
            "integral_weight": float(x[2]),
            "input_weight": [[max(float(x[3]), 1e-6)]],
        }
    }


STACKS = {
    "pid-l1": ("pid", _pid_parameters, _pid_overrides),
    "lqr-l1": ("lqr", _lqr_parameters, _lqr_overrides),
}


def scenario_objective(base: dict, overrides: Callable[[np.ndarray], dict]) -> Callable[[np.ndarray], float]:
    """Average position error of the scenario with `overrides(x)` applied; failures cost inf."""

    def objective(x: np.ndarray) -> float:
        data = merge_settings(base, overrides(x))
        try:
            result = bench_service.run_scenario(Scenario(**data))
        except (L1MpcError, ValueError) as e:
            logger.debug(f"tuning candidate {x.tolist()} rejected: {e}")
            return math.inf
        return result.avg_error if result.ok else math.inf

    return objective


def tune(
    stack: str,
    trajectory: int = TUNING_DEFAULTS.get("trajectory", 4),
    iterations: int = TUNING_DEFAULTS.get("iterations", 50),
    initial_step: float = TUNING_DEFAULTS.get("initial_step", 0.25),
    base: Optional[dict] = None,
) -> TuningResult:
    """
    Coordinate descent over the outer-loop parameters of a feedback-only stack,
    minimizing the no-wind average error on one trajectory. The returned
    overrides are meant to be frozen into every other scenario.
    """
    if stack not in STACKS:
        raise ConfigurationError(f"tuning supports {sorted(STACKS)}, got '{stack}'")
    outer, parameters, overrides = STACKS[stack]
    data = dict(base or {})
    data.update(outer=outer, inner="l1", trajectory=trajectory, wind={"kind": "off"}, wind_name="off")
    try:
        names, x0 = parameters(Scenario(**data))
    except ValueError as e:
        raise ConfigurationError(f"invalid tuning base scenario: {e}")

    evaluate = scenario_objective(data, overrides)
    seen: Dict[tuple, float] = {}

    def objective(x: np.ndarray) -> float:
        key = tuple(np.round(x, 12).tolist())
        if key not in seen:
            seen[key] = evaluate(x)
        return seen[key]

    history: List[float] = []

    def on_iteration(i: int, x: np.ndarray, best: float) -> None:
        history.append(best)
        logger.info(f"tune {stack} iteration {i + 1}/{iterations}: e={best:.5f} at {np.round(x, 4).tolist()}")

    initial_error = objective(x0)
    x, best = baseline_service.coordinate_descent(
        objective, x0, iterations=iterations, initial_step=initial_step, on_iteration=on_iteration
    )
    return TuningResult(
        stack=stack,
        trajectory=trajectory,
        iterations=iterations,
        parameters=dict(zip(names, (float(v) for v in x))),
        avg_error=best,
        initial_error=initial_error,
        history=history,
        overrides=overrides(x),
    )


def _cache_path(cache_dir: str, stack: str, settings: SuiteTuning, base: dict) -> Path:
    payload = json.dumps(
        {
            "stack": stack,
            "trajectory": settings.trajectory,
            "iterations": settings.iterations,
            "initial_step": settings.initial_step,
            "base": base,
        },
        sort_keys=True,
        default=str,
    )
    digest = hashlib.sha256(payload.encode()).hexdigest()[:16]
    return Path(cache_dir) / f"{stack}__traj{settings.trajectory}__{digest}.json"


def tune_frozen(stack: str, settings: SuiteTuning, base: Optional[dict] = None) -> TuningResult:
    """
    tune() with the suite's settings. With a cache_dir the result is stored
    and reused by later runs with the same stack, settings and base.
    """
    base = dict(base or {})
    path = _cache_path(settings.cache_dir, stack, settings, base) if settings.cache_dir else None
    if path is not None and path.exists():
        try:
            cached = load_document(path, TuningResult)
            logger.info(f"frozen {stack} parameters read from {path}")
            return cached
        except ConfigurationError as e:
            logger.warning(f"ignoring unreadable tuning cache {path}: {e}")
    result = tune(
        stack,
        trajectory=settings.trajectory,
        iterations=settings.iterations,
        initial_step=settings.initial_step,
        base=base,
    )
    if path is not None:
        write_json(path, result.model_dump())
        logger.info(f"frozen {stack} parameters written to {path}")
    return result
