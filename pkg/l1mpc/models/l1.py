# l1mpc/models/l1.py
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from l1mpc.models.lti import LtiRunner


class L1State(BaseModel):
    """
    Mutable controller state. `predictor` runs the diagonal ZOH reference model
    whose state is ŷ1; `filter_runners` run C_i(s) per axis.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    sigma_hat: np.ndarray
    predictor: LtiRunner
    filter_runners: List[LtiRunner]
    last_output: np.ndarray
    estimation_error: np.ndarray
    saturation_count: int = 0

    @property
    def predictor_state(self) -> np.ndarray:
        """ŷ1, the predictor output."""
        return self.predictor.system.c @ self.predictor.state


class NormConditionReport(BaseModel):
    g_norm: float = Field(ge=0)
    lipschitz_L: float = Field(ge=0)
    product: float
    satisfied: bool
    h_stable: bool
    axis: int = 0
    per_axis_g_norm: List[float] = Field(default_factory=list)
    gamma1_factor: Optional[float] = None
    horizon_sufficient: bool = True

    @model_validator(mode="after")
    def _verdict_consistent(self):
        if self.satisfied != (self.h_stable and self.product < 1.0):
            raise ValueError("satisfied must equal h_stable and product < 1")
        return self
