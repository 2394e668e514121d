# l1mpc/models/plant.py
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from l1mpc.exceptions import SimulationAbort


class VehicleState(BaseModel):
    """Position y2, velocity y1 (world frame), attitude (roll, pitch, yaw)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray
    time: float = 0.0

    @field_validator("position", "velocity", "attitude", mode="before")
    @classmethod
    def _vector(cls, value):
        value = np.array(value, dtype=float).reshape(3)
        value.flags.writeable = False
        return value

    @model_validator(mode="after")
    def _finite(self):
        if not all(np.all(np.isfinite(v)) for v in (self.position, self.velocity, self.attitude)):
            raise SimulationAbort("non-finite vehicle state", trace=[self.as_vector().tolist()])
        if not math.isfinite(self.time):
            raise SimulationAbort("non-finite simulation time")
        return self

    @classmethod
    def hover(cls, position, yaw: float = 0.0) -> "VehicleState":
        return cls(position=position, velocity=np.zeros(3), attitude=[0.0, 0.0, yaw])

    @classmethod
    def from_vector(cls, x: np.ndarray, time: float) -> "VehicleState":
        return cls(position=x[0:3], velocity=x[3:6], attitude=x[6:9], time=time)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.attitude])

    @property
    def yaw(self) -> float:
        return float(self.attitude[2])


class Command(BaseModel):
    """Attitude-level command; `clamped` counts channels cut back to their limits."""

    model_config = ConfigDict(frozen=True)

    roll_des: float = 0.0
    pitch_des: float = 0.0
    vz_des: float = 0.0
    yawrate_des: float = 0.0
    clamped: int = Field(default=0, ge=0)

    @property
    def saturated(self) -> bool:
        return self.clamped > 0

    def as_vector(self) -> np.ndarray:
        return np.array([self.roll_des, self.pitch_des, self.vz_des, self.yawrate_des])
