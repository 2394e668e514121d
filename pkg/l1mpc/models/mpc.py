# l1mpc/models/mpc.py
import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from l1mpc.exceptions import LtiError
from l1mpc.models.lti import LtiSystem
from l1mpc.schemas.controllers import MpcConfig


class MpcProblem(BaseModel):
    """
    Finite-horizon tracking problem on one axis. Decision vector: the inputs
    r(k̄), ..., r(k̄+N_h); tracked outputs y(k̄+1), ..., y(k̄+N_h+1).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    horizon: int = Field(default=20, ge=1)
    model: LtiSystem
    q: float = Field(gt=0)
    r: float = Field(default=0.0, ge=0)
    s: float = Field(default=0.0, ge=0)
    r_max: float = Field(default=math.inf, gt=0)
    sample_period: float = Field(gt=0)
    input_reference: Literal["origin", "steady_state"] = "origin"
    max_iterations: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_model(self):
        if not self.model.is_discrete:
            raise LtiError("MPC model must be discrete")
        if self.model.n_inputs != 1 or self.model.n_outputs != 1:
            raise LtiError("MPC model must be single-input single-output per axis")
        if np.any(self.model.d):
            raise LtiError("MPC model must be strictly proper")
        if not math.isclose(self.model.dt, self.sample_period, rel_tol=1e-9):
            raise LtiError(
                f"model sample period {self.model.dt} differs from {self.sample_period}"
            )
        return self

    @property
    def n_inputs(self) -> int:
        return self.horizon + 1

    @classmethod
    def from_config(cls, cfg: MpcConfig, model: LtiSystem) -> "MpcProblem":
        return cls(
            horizon=cfg.horizon,
            model=model,
            q=cfg.q,
            r=cfg.r,
            s=cfg.s,
            r_max=cfg.r_max,
            sample_period=cfg.sample_period,
            input_reference=cfg.input_reference,
            max_iterations=cfg.max_iterations,
        )


class QpSpec(BaseModel):
    """min ½ xᵀ H x - fᵀ x  s.t.  G x ≤ h."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    hessian: np.ndarray
    linear: np.ndarray
    ineq_matrix: np.ndarray
    ineq_bound: np.ndarray
    constant: float = 0.0

    @field_validator("hessian", "linear", "ineq_matrix", "ineq_bound", mode="before")
    @classmethod
    def _coerce(cls, value):
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def _check(self):
        d = self.linear.shape[0]
        if self.linear.ndim != 1:
            raise LtiError("linear term must be a vector")
        if self.hessian.shape != (d, d):
            raise LtiError(f"hessian shape {self.hessian.shape}, expected {(d, d)}")
        scale = max(1.0, float(np.max(np.abs(self.hessian)))) if d else 1.0
        if np.max(np.abs(self.hessian - self.hessian.T), initial=0.0) > 1e-12 * scale:
            raise LtiError("hessian is not symmetric")
        if self.ineq_matrix.size == 0:
            object.__setattr__(self, "ineq_matrix", np.zeros((0, d)))
            object.__setattr__(self, "ineq_bound", np.zeros(0))
        if self.ineq_matrix.shape != (self.ineq_bound.shape[0], d):
            raise LtiError("inequality matrix and bound disagree")
        if not all(np.all(np.isfinite(x)) for x in (self.hessian, self.linear, self.ineq_matrix, self.ineq_bound)):
            raise LtiError("QP data has non-finite entries")
        return self

    @property
    def dimension(self) -> int:
        return self.linear.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.ineq_bound.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.hessian @ x - self.linear @ x + self.constant)


class QpSolution(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    primal: np.ndarray
    active_set: List[int]
    multipliers: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int


class MpcStepResult(BaseModel):
    """First move and the full plan of one receding-horizon solve."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    input: float
    inputs: np.ndarray
    predicted_outputs: np.ndarray
    predicted_states: np.ndarray
    solution: QpSolution
