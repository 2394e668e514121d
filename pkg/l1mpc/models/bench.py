# l1mpc/models/bench.py
import math
from typing import List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from l1mpc.exceptions import ConfigurationError

AXES = ("x", "y", "z")
# one row per controller sample; r2cmd_* is what the inner layer actually received
SERIES_GROUPS = ("r2", "r2cmd", "y2", "y1", "yhat1", "sigmahat", "u", "wind")
SERIES_COLUMNS = ["t"] + [f"{group}_{axis}" for group in SERIES_GROUPS for axis in AXES]


def columns(group: str) -> List[str]:
    return [f"{group}_{axis}" for axis in AXES]


class Trajectory(BaseModel):
    """Uniformly sampled desired positions r2*(k) with finite-difference velocities."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: int = Field(ge=1, le=5)
    name: str
    sample_period: float = Field(gt=0)
    positions: np.ndarray
    velocities: np.ndarray
    hover_samples: int = Field(ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.positions.ndim != 2 or self.positions.shape[1] != 3 or len(self.positions) < 2:
            raise ConfigurationError("trajectory positions must be an (N, 3) array with N >= 2")
        if self.velocities.shape != self.positions.shape:
            raise ConfigurationError("trajectory velocities must match positions")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.velocities))):
            raise ConfigurationError(f"trajectory {self.id} has non-finite samples")
        return self

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.sample_period

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.sample_period

    @property
    def start(self) -> np.ndarray:
        return self.positions[0].copy()

    @property
    def max_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.velocities, axis=1)))

    def window(self, k: int, stride: int, count: int) -> np.ndarray:
        """Samples k + stride·j for j = 1..count, held at the final waypoint past the end."""
        index = np.minimum(k + stride * np.arange(1, count + 1), len(self) - 1)
        return self.positions[index]

    def position_at(self, t: float) -> np.ndarray:
        k = min(int(round(t / self.sample_period)), len(self) - 1)
        return self.positions[max(k, 0)].copy()


class ScenarioResult(BaseModel):
    """
    Outcome of one closed-loop run. `series` has one row per controller
    sample; a failed run keeps the rows recorded before the failure.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    key: str
    stack: str
    trajectory: int
    wind_name: str
    seed: int
    status: Literal["ok", "failed"] = "ok"
    detail: Optional[str] = None
    series: pd.DataFrame
    avg_error: float = math.nan
    axis_rms: List[float] = Field(default_factory=lambda: [math.nan] * 3)
    runtime: float = 0.0
    max_estimation_error: Optional[List[float]] = None
    projection_saturations: int = 0
    clamped_commands: int = 0
    r_max: Optional[float] = None
    max_second_difference: Optional[float] = None
    second_difference_excess: Optional[float] = None
    qp_iterations: int = 0
    identification_residual: Optional[List[float]] = None
    ideal_rms: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        missing = [c for c in SERIES_COLUMNS if c not in self.series.columns]
        if missing:
            raise ConfigurationError(f"result series lacks columns {missing}")
        return self

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def summary_row(self) -> dict:
        return {
            "key": self.key,
            "stack": self.stack,
            "trajectory": self.trajectory,
            "wind": self.wind_name,
            "seed": self.seed,
            "status": self.status,
            "samples": len(self.series),
            "avg_error": self.avg_error,
            "rms_x": self.axis_rms[0],
            "rms_y": self.axis_rms[1],
            "rms_z": self.axis_rms[2],
            "max_second_difference": self.max_second_difference,
            "ideal_rms": self.ideal_rms,
            "detail": self.detail or "",
        }
