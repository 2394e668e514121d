# l1mpc/schemas/plant.py
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from l1mpc.configs import section

PLANT_DEFAULTS = section("plant")
WIND_DEFAULTS = section("wind")


class PlantParams(BaseModel):
    """
    Nominal vehicle parameters. The simulated vehicle uses mass·mass_error_factor
    and drag·drag_error_factor, so the truth never matches what a baseline assumes.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    mass: float = Field(default=PLANT_DEFAULTS["mass"], gt=0)
    linear_drag: List[float] = Field(
        default_factory=lambda: list(PLANT_DEFAULTS["linear_drag"])
    )
    attitude_time_constant: float = Field(
        default=PLANT_DEFAULTS["attitude_time_constant"], gt=0
    )
    vz_time_constant: float = Field(default=PLANT_DEFAULTS["vz_time_constant"], gt=0)
    gravity: float = Field(default=PLANT_DEFAULTS["gravity"], gt=0)
    mass_error_factor: float = Field(
        default=PLANT_DEFAULTS["mass_error_factor"], ge=0.5, le=2.0
    )
    drag_error_factor: float = Field(default=PLANT_DEFAULTS["drag_error_factor"], gt=0)
    max_tilt: float = Field(default=PLANT_DEFAULTS["max_tilt"], gt=0, lt=math.pi / 2)
    max_vz: float = Field(default=PLANT_DEFAULTS["max_vz"], gt=0)
    yaw_gain: float = Field(default=PLANT_DEFAULTS["yaw_gain"], ge=0)
    initial_yaw: float = PLANT_DEFAULTS["initial_yaw"]
    dt: float = Field(default=PLANT_DEFAULTS["dt"], gt=0, le=1e-3)
    position_noise_std: float = Field(default=PLANT_DEFAULTS["position_noise_std"], ge=0)

    @field_validator("linear_drag")
    @classmethod
    def _positive_drag(cls, value):
        if len(value) != 3 or any(v <= 0 for v in value):
            raise ValueError("linear_drag needs three strictly positive entries")
        return value

    @property
    def effective_mass(self) -> float:
        return self.mass * self.mass_error_factor

    @property
    def effective_drag(self) -> np.ndarray:
        return np.asarray(self.linear_drag) * self.drag_error_factor


class GustRegion(BaseModel):
    """Axis-aligned box given by center and edge lengths."""

    model_config = ConfigDict(extra="forbid")

    center: Tuple[float, float, float]
    size: Tuple[float, float, float] = tuple(WIND_DEFAULTS.get("region_size", [1.0, 1.0, 1.0]))

    @field_validator("size")
    @classmethod
    def _positive(cls, value):
        if any(v <= 0 for v in value):
            raise ValueError("region size must be positive")
        return value

    def contains(self, position) -> bool:
        offset = np.abs(np.asarray(position) - np.asarray(self.center))
        return bool(np.all(offset <= 0.5 * np.asarray(self.size)))


class WindModel(BaseModel):
    """
    Disturbance force on the vehicle. Active for t_on ≤ t < t_off; a gust
    region additionally requires the vehicle to be inside the box. A gust
    region left as None is placed by the bench at the trajectory midpoint.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    kind: Literal["off", "constant", "gust_region", "turbulent"] = WIND_DEFAULTS["kind"]
    magnitude: float = Field(default=WIND_DEFAULTS["magnitude"], ge=0)
    direction: Tuple[float, float, float] = tuple(WIND_DEFAULTS["direction"])
    region: Optional[GustRegion] = None
    activation_window: Tuple[float, float] = (0.0, math.inf)
    noise_seed: int = 0
    intensity: float = Field(default=WIND_DEFAULTS["intensity"], ge=0)

    @field_validator("direction")
    @classmethod
    def _unit_direction(cls, value):
        norm = float(np.linalg.norm(value))
        if not math.isfinite(norm) or norm == 0.0:
            raise ValueError("direction must be a non-zero finite vector")
        return tuple(float(v) / norm for v in value)

    @model_validator(mode="after")
    def _check_window(self):
        t_on, t_off = self.activation_window
        if t_off < t_on:
            raise ValueError("activation window must satisfy t_on <= t_off")
        return self

    def active_at(self, t: float) -> bool:
        t_on, t_off = self.activation_window
        return self.kind != "off" and t_on <= t < t_off
