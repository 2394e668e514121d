# l1mpc/schemas/controllers.py
import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from l1mpc.configs import section

L1_DEFAULTS = section("l1")
MPC_DEFAULTS = section("mpc")
PID_OUTER_DEFAULTS = section("pid_outer")
PID_INNER_DEFAULTS = section("pid_inner")
LQR_DEFAULTS = section("lqr")
IDENTIFICATION_DEFAULTS = section("identification")


def _broadcast(value, n: int, name: str) -> List[float]:
    if value is None:
        return value
    if isinstance(value, (int, float)):
        return [float(value)] * n
    value = [float(v) for v in value]
    if len(value) != n:
        raise ValueError(f"{name} needs {n} entries, got {len(value)}")
    return value


# --- L1 adaptive controller ---
class L1Config(BaseModel):
    """
    Per-axis diagonal L1 controller. outer_gains[i] = 0 turns axis i into the
    plain velocity-level controller; > 0 wraps it in the proportional position loop.
    """

    model_config = ConfigDict(extra="forbid", validate_default=True)

    axes: int = Field(default=3, ge=1)
    ref_poles: List[float] = Field(default_factory=lambda: list(L1_DEFAULTS["ref_poles"]))
    filter_cutoffs: List[float] = Field(
        default_factory=lambda: list(L1_DEFAULTS["filter_cutoffs"])
    )
    adaptation_gain: float = Field(default=L1_DEFAULTS["adaptation_gain"], gt=0)
    proj_bound: List[float] = Field(default_factory=lambda: list(L1_DEFAULTS["proj_bound"]))
    sample_period: float = Field(default=L1_DEFAULTS["sample_period"], gt=0)
    outer_gains: List[float] = Field(
        default_factory=lambda: list(L1_DEFAULTS["outer_gains"])
    )
    adaptation_margin: float = Field(
        default=L1_DEFAULTS["adaptation_margin"], gt=0, le=1
    )

    @field_validator(
        "ref_poles", "filter_cutoffs", "proj_bound", "outer_gains", mode="before"
    )
    @classmethod
    def _per_axis(cls, value, info):
        return _broadcast(value, info.data.get("axes", 3), info.field_name)

    @model_validator(mode="after")
    def _check(self):
        for name in ("ref_poles", "filter_cutoffs", "proj_bound"):
            if any(v <= 0 for v in getattr(self, name)):
                raise ValueError(f"{name} must be strictly positive")
        if any(v < 0 for v in self.outer_gains):
            raise ValueError("outer_gains must be non-negative")
        # forward-Euler adaptation against the ZOH predictor
        for axis, m in enumerate(self.ref_poles):
            a = math.exp(-m * self.sample_period)
            loop_gain = self.adaptation_gain * self.sample_period * (1.0 - a)
            limit = self.adaptation_margin * 2.0 * (1.0 + a)
            if loop_gain > limit:
                raise ValueError(
                    f"adaptation gain {self.adaptation_gain:g} too large for sample "
                    f"period {self.sample_period:g} on axis {axis} "
                    f"(loop gain {loop_gain:.4g} > {limit:.4g})"
                )
        return self

    @property
    def extended(self) -> np.ndarray:
        return np.asarray(self.outer_gains) > 0


# --- MPC ---
class MpcConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_default=True)

    horizon: int = Field(default=MPC_DEFAULTS["horizon"], ge=1)
    q: float = Field(default=MPC_DEFAULTS["q"], gt=0)
    r: float = Field(default=MPC_DEFAULTS["r"], ge=0)
    s: float = Field(default=MPC_DEFAULTS["s"], ge=0)
    r_max: float = Field(default=MPC_DEFAULTS["r_max"], gt=0)
    sample_period: float = Field(default=MPC_DEFAULTS["sample_period"], gt=0)
    input_reference: Literal["origin", "steady_state"] = MPC_DEFAULTS["input_reference"]
    max_iterations: Optional[int] = Field(default=MPC_DEFAULTS.get("max_iterations"), ge=1)


# --- Baselines ---
class PidConfig(BaseModel):
    """Parallel-form PID, one gain triple per axis."""

    model_config = ConfigDict(extra="forbid", validate_default=True)

    axes: int = Field(default=3, ge=1)
    kp: List[float] = Field(default_factory=lambda: list(PID_OUTER_DEFAULTS["kp"]))
    ki: List[float] = Field(default_factory=lambda: list(PID_OUTER_DEFAULTS["ki"]))
    kd: List[float] = Field(default_factory=lambda: list(PID_OUTER_DEFAULTS["kd"]))
    derivative_filter_cutoff: float = Field(
        default=PID_OUTER_DEFAULTS["derivative_filter_cutoff"], gt=0
    )
    output_limit: Optional[List[float]] = Field(
        default_factory=lambda: PID_OUTER_DEFAULTS.get("output_limit")
    )
    sample_period: float = Field(default=PID_OUTER_DEFAULTS["sample_period"], gt=0)

    @field_validator("kp", "ki", "kd", "output_limit", mode="before")
    @classmethod
    def _per_axis(cls, value, info):
        return _broadcast(value, info.data.get("axes", 3), info.field_name)

    @model_validator(mode="after")
    def _check(self):
        for name in ("kp", "ki", "kd"):
            if any(v < 0 for v in getattr(self, name)):
                raise ValueError(f"{name} must be non-negative")
        if self.output_limit is not None and any(v <= 0 for v in self.output_limit):
            raise ValueError("output_limit must be strictly positive")
        return self

    @classmethod
    def inner_defaults(cls, **overrides) -> "PidConfig":
        data = {k: v for k, v in PID_INNER_DEFAULTS.items()}
        data.update(overrides)
        return cls(**data)


class LqrConfig(BaseModel):
    """Weights of the per-axis [position error, velocity error, integral] regulator."""

    model_config = ConfigDict(extra="forbid", validate_default=True)

    state_weights: List[List[float]] = Field(
        default_factory=lambda: [list(r) for r in LQR_DEFAULTS["state_weights"]]
    )
    input_weight: List[List[float]] = Field(
        default_factory=lambda: [list(r) for r in LQR_DEFAULTS["input_weight"]]
    )
    integral_weight: List[float] = Field(
        default_factory=lambda: list(LQR_DEFAULTS["integral_weight"])
    )
    sample_period: float = Field(default=LQR_DEFAULTS["sample_period"], gt=0)

    @field_validator("integral_weight", mode="before")
    @classmethod
    def _per_axis(cls, value):
        return _broadcast(value, 3, "integral_weight")

    @model_validator(mode="after")
    def _check(self):
        q = np.asarray(self.state_weights, dtype=float)
        r = np.asarray(self.input_weight, dtype=float)
        if q.shape != (2, 2) or r.shape != (1, 1):
            raise ValueError("state_weights must be 2x2 and input_weight 1x1")
        if not np.allclose(q, q.T) or np.min(np.linalg.eigvalsh(q)) < -1e-12:
            raise ValueError("state_weights must be symmetric positive semidefinite")
        if r[0, 0] <= 0:
            raise ValueError("input_weight must be positive definite")
        if any(w < 0 for w in self.integral_weight):
            raise ValueError("integral_weight must be non-negative")
        return self


class IdentificationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_default=True)

    step_size: float = Field(default=IDENTIFICATION_DEFAULTS["step_size"], gt=0)
    duration: float = Field(default=IDENTIFICATION_DEFAULTS["duration"], gt=0)
    settle_time: float = Field(default=IDENTIFICATION_DEFAULTS["settle_time"], ge=0)
    order: Literal[1, 2] = IDENTIFICATION_DEFAULTS["order"]
