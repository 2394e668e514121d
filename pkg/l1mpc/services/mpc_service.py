# l1mpc/services/mpc_service.py
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from l1mpc.exceptions import LtiError
from l1mpc.models.lti import LtiSystem
from l1mpc.models.mpc import MpcProblem, MpcStepResult, QpSpec
from l1mpc.services import lti_service
from l1mpc.services.qp_service import solve_qp

logger = logging.getLogger(__name__)


def reference_tracking_model(a_d: float, b_d: float, sample_period: float) -> LtiSystem:
    """
    Scalar discrete model y(k+1) = A_D y(k) + B_D (r(k) - y(k)), written as a
    plain state-space system with state matrix A_D - B_D.
    """
    return LtiSystem(a=[[a_d - b_d]], b=[[b_d]], c=[[1.0]], d=[[0.0]], dt=sample_period)


def prediction_matrices(prob: MpcProblem):
    """
    Phi (N+1, n) and Gamma (N+1, N+1) with Y = Phi x0 + Gamma U for
    Y = [y(k̄+1) .. y(k̄+N+1)], U = [r(k̄) .. r(k̄+N)].
    """
    A, B, C = prob.model.a, prob.model.b, prob.model.c
    steps = prob.n_inputs
    n = prob.model.order
    phi = np.zeros((steps, n))
    markov = np.zeros(steps)
    power = np.eye(n)
    for j in range(steps):
        markov[j] = (C @ power @ B)[0, 0]
        power = A @ power
        phi[j] = (C @ power).ravel()
    gamma = np.zeros((steps, steps))
    for j in range(steps):
        gamma[j, : j + 1] = markov[j::-1]
    return phi, gamma


def _second_difference(steps: int) -> np.ndarray:
    E = np.zeros((steps, steps))
    for j in range(steps):
        E[j, j] = 1.0
        if j >= 1:
            E[j, j - 1] = -2.0
        if j >= 2:
            E[j, j - 2] = 1.0
    return E


def _first_difference(steps: int) -> np.ndarray:
    return np.eye(steps) - np.eye(steps, k=-1)


def _as_target(y_star, steps: int) -> np.ndarray:
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    if y_star.ndim != 1 or y_star.size == 0:
        raise LtiError("target sequence must be a non-empty vector")
    if y_star.size < steps:
        y_star = np.concatenate([y_star, np.full(steps - y_star.size, y_star[-1])])
    return y_star[:steps]


def condense(prob: MpcProblem, y_now, y_star, r_prev) -> QpSpec:
    """
    Eliminates the predicted outputs, leaving the input sequence as the
    decision vector:

        J = q‖Y - Y*‖² + r‖U - U_ref‖² + s‖ΔU‖²
          = ½ Uᵀ H U - fᵀ U + const

    ΔU starts from the last applied input r_prev[-1]. Second-difference rows
    ±(r(k) - 2r(k-1) + r(k-2)) ≤ r_max Ts² use r_prev for the two pre-horizon
    values and are omitted when r_max is infinite.
    """
    x0 = np.atleast_1d(np.asarray(y_now, dtype=float))
    if x0.shape != (prob.model.order,):
        raise LtiError(f"state has dimension {x0.size}, model order is {prob.model.order}")
    r_prev = np.atleast_1d(np.asarray(r_prev, dtype=float))
    if r_prev.shape != (2,):
        raise LtiError("r_prev must hold the two previously applied inputs")
    steps = prob.n_inputs
    target = _as_target(y_star, steps)

    phi, gamma = prediction_matrices(prob)
    free = phi @ x0
    if prob.input_reference == "steady_state":
        gain = float(lti_service.dc_gain(prob.model)[0, 0])
        u_ref = target / gain if abs(gain) > 1e-12 else np.zeros(steps)
    else:
        u_ref = np.zeros(steps)
    D = _first_difference(steps)
    d0 = np.zeros(steps)
    d0[0] = r_prev[-1]

    hessian = 2.0 * (prob.q * gamma.T @ gamma + prob.r * np.eye(steps) + prob.s * D.T @ D)
    hessian = 0.5 * (hessian + hessian.T)
    linear = 2.0 * (prob.q * gamma.T @ (target - free) + prob.r * u_ref + prob.s * D.T @ d0)
    constant = (
        prob.q * float((target - free) @ (target - free))
        + prob.r * float(u_ref @ u_ref)
        + prob.s * float(d0 @ d0)
    )

    if math.isinf(prob.r_max):
        G, h = np.zeros((0, steps)), np.zeros(0)
    else:
        E = _second_difference(steps)
        c = np.zeros(steps)
        c[0] = -2.0 * r_prev[-1] + r_prev[-2]
        if steps > 1:
            c[1] = r_prev[-1]
        bound = prob.r_max * prob.sample_period ** 2
        G = np.vstack([E, -E])
        h = np.concatenate([bound - c, bound + c])
    return QpSpec(hessian=hessian, linear=linear, ineq_matrix=G, ineq_bound=h, constant=constant)


def stack_qps(specs: Sequence[QpSpec]) -> QpSpec:
    """Block-diagonal joint QP of independent per-axis problems."""
    return QpSpec(
        hessian=linalg.block_diag(*[s.hessian for s in specs]),
        linear=np.concatenate([s.linear for s in specs]),
        ineq_matrix=linalg.block_diag(*[s.ineq_matrix for s in specs])
        if any(s.n_constraints for s in specs)
        else np.zeros((0, sum(s.dimension for s in specs))),
        ineq_bound=np.concatenate([s.ineq_bound for s in specs]),
        constant=sum(s.constant for s in specs),
    )


def predict(prob: MpcProblem, y_now, inputs) -> tuple:
    """Forward-simulates the model: states x(k̄..k̄+N+1) and outputs y(k̄+1..k̄+N+1)."""
    x = np.atleast_1d(np.asarray(y_now, dtype=float))
    states = [x]
    for u in inputs:
        x = prob.model.a @ x + prob.model.b[:, 0] * u
        states.append(x)
    states = np.array(states)
    outputs = states[1:] @ prob.model.c[0]
    return states, outputs


def mpc_step(prob: MpcProblem, y_now, y_star_window, r_prev) -> MpcStepResult:
    spec = condense(prob, y_now, y_star_window, r_prev)
    solution = solve_qp(spec, max_iterations=prob.max_iterations)
    states, outputs = predict(prob, y_now, solution.primal)
    return MpcStepResult(
        input=float(solution.primal[0]),
        inputs=solution.primal.copy(),
        predicted_outputs=outputs,
        predicted_states=states,
        solution=solution,
    )


class MpcPlanner:
    """
    Receding-horizon reference generator over independent axes. Keeps the two
    most recently applied inputs per axis for the δr and second-difference terms.
    """

    def __init__(self, problems: Sequence[MpcProblem], initial_input: Sequence[float]):
        self.problems: List[MpcProblem] = list(problems)
        initial = np.asarray(initial_input, dtype=float)
        self.r_prev = np.stack([initial, initial], axis=1)
        self.periods = np.array([p.sample_period for p in self.problems])
        self.steps = 0
        self.worst_second_difference = 0.0
        self.iterations = 0
        self.last_results: Optional[List[MpcStepResult]] = None

    @property
    def axes(self) -> int:
        return len(self.problems)

    def step(self, states: Sequence[np.ndarray], targets: np.ndarray) -> np.ndarray:
        """states[i]: model state of axis i; targets: (N+1, axes) output targets."""
        targets = np.asarray(targets, dtype=float)
        results = []
        for i, prob in enumerate(self.problems):
            result = mpc_step(prob, states[i], targets[:, i], self.r_prev[i])
            self.iterations += result.solution.iterations
            results.append(result)
        command = np.array([r.input for r in results])
        second = np.abs(command - 2.0 * self.r_prev[:, 1] + self.r_prev[:, 0]) / self.periods ** 2
        self.worst_second_difference = max(self.worst_second_difference, float(np.max(second)))
        self.r_prev = np.stack([self.r_prev[:, 1], command], axis=1)
        self.steps += 1
        self.last_results = results
        return command

    def max_second_difference(self) -> float:
        """Largest |r(k) - 2r(k-1) + r(k-2)| / Ts² over the applied sequence, with r(-1) = r(-2) = initial input."""
        return self.worst_second_difference
