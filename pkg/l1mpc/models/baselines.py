# l1mpc/models/baselines.py
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from l1mpc.exceptions import LtiError
from l1mpc.models.lti import LtiSystem


class PidState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    integral: np.ndarray
    prev_error: np.ndarray
    derivative: np.ndarray
    primed: bool = False

    @classmethod
    def zeros(cls, axes: int) -> "PidState":
        return cls(
            integral=np.zeros(axes), prev_error=np.zeros(axes), derivative=np.zeros(axes)
        )


class StepRecord(BaseModel):
    """One closed-loop step experiment sampled at the model period, deviations from hover."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    sample_period: float
    reference: np.ndarray
    position: np.ndarray
    velocity: np.ndarray

    @model_validator(mode="after")
    def _check(self):
        n = len(self.reference)
        if len(self.position) != n or len(self.velocity) != n:
            raise LtiError("step record series must have equal length")
        if n < 4:
            raise LtiError("step record too short to fit a model")
        return self


class AxisFit(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: LtiSystem
    coefficients: np.ndarray
    fit_residual: float


class IdentifiedModel(BaseModel):
    """Per-axis discrete models kept fixed across every trajectory."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    axes: List[LtiSystem]
    fit_residual: List[float]
    order: int = 2
