# l1mpc/services/baseline_service.py
import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from l1mpc.configs import section
from l1mpc.exceptions import ConvergenceError, IdentificationError, LtiError
from l1mpc.models.baselines import AxisFit, IdentifiedModel, PidState, StepRecord
from l1mpc.models.lti import LtiSystem
from l1mpc.schemas.controllers import LqrConfig, PidConfig
from l1mpc.services import lti_service

logger = logging.getLogger(__name__)

DARE_CONFIG = section("dare")


# --- PID ---
def pid_step(cfg: PidConfig, state: PidState, error) -> np.ndarray:
    """
    Parallel PID: kp e + ki ∫e + kd ė_f. The integral accumulates before the
    output (rectangle rule) and is clamped to ±limit/ki; the derivative is
    first-order filtered at the cutoff and zero on the first call.
    """
    error = np.asarray(error, dtype=float).reshape(-1)
    kp, ki, kd = (np.asarray(g) for g in (cfg.kp, cfg.ki, cfg.kd))
    ts = cfg.sample_period

    state.integral = state.integral + error * ts
    if cfg.output_limit is not None:
        limit = np.asarray(cfg.output_limit)
        with np.errstate(divide="ignore"):
            cap = np.where(ki > 0, limit / np.where(ki > 0, ki, 1.0), np.inf)
        state.integral = np.clip(state.integral, -cap, cap)

    if state.primed:
        raw = (error - state.prev_error) / ts
        alpha = math.exp(-cfg.derivative_filter_cutoff * ts)
        state.derivative = alpha * state.derivative + (1.0 - alpha) * raw
    else:
        state.derivative = np.zeros_like(error)
        state.primed = True
    state.prev_error = error

    output = kp * error + ki * state.integral + kd * state.derivative
    if cfg.output_limit is not None:
        output = np.clip(output, -np.asarray(cfg.output_limit), np.asarray(cfg.output_limit))
    return output


class PidController:
    def __init__(self, cfg: PidConfig):
        self.cfg = cfg
        self.state = PidState.zeros(cfg.axes)

    def reset(self) -> None:
        self.state = PidState.zeros(self.cfg.axes)

    def step(self, error) -> np.ndarray:
        return pid_step(self.cfg, self.state, error)


# --- DARE / LQR ---
def riccati_map(A, B, Q, R, P) -> np.ndarray:
    BtP = B.T @ P
    return Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A)


def dare_residual(A, B, Q, R, P) -> float:
    return float(np.max(np.abs(P - riccati_map(A, B, Q, R, P))))


def solve_dare(
    A,
    B,
    Q,
    R,
    tol: float = DARE_CONFIG.get("tol", 1e-12),
    max_iterations: int = DARE_CONFIG.get("max_iterations", 100000),
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fixed-point Riccati iteration from P = Q. Returns (P, K) with
    K = (R + BᵀPB)⁻¹ BᵀPA.
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, Q, R))
    n, m = B.shape
    if A.shape != (n, n) or Q.shape != (n, n) or R.shape != (m, m):
        raise LtiError("solve_dare: inconsistent dimensions")
    P = Q.copy()
    for iteration in range(1, int(max_iterations) + 1):
        P_next = riccati_map(A, B, Q, R, P)
        P_next = 0.5 * (P_next + P_next.T)
        delta = np.max(np.abs(P_next - P))
        P = P_next
        if not np.all(np.isfinite(P)):
            raise ConvergenceError("Riccati iteration diverged; (A, B) may not be stabilizable")
        if delta <= tol * max(1.0, float(np.max(np.abs(P)))):
            logger.debug(f"DARE converged in {iteration} iterations")
            break
    else:
        raise ConvergenceError(f"Riccati iteration did not converge in {max_iterations} iterations")
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return P, K


def integral_augmented(model: LtiSystem) -> Tuple[np.ndarray, np.ndarray]:
    """[x; z] with z(k+1) = z(k) + Ts (C x(k))."""
    n = model.order
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = model.a
    A[n, :n] = model.dt * model.c[0]
    A[n, n] = 1.0
    B = np.vstack([model.b, np.zeros((1, model.n_inputs))])
    return A, B


class LqrController:
    """
    Per-axis infinite-horizon LQR on [position error, velocity error, ∫position
    error] of the discretized ideal model. Output is the reference handed to
    the inner loop: r2* - K e.
    """

    def __init__(self, cfg: LqrConfig, axis_models: Sequence[LtiSystem]):
        self.cfg = cfg
        self.gains = []
        for i, model in enumerate(axis_models):
            if model.dt is None:
                model = lti_service.discretize_zoh(model, cfg.sample_period)
            A, B = integral_augmented(model)
            Q = np.zeros((3, 3))
            Q[:2, :2] = np.asarray(cfg.state_weights)
            Q[2, 2] = cfg.integral_weight[i]
            _, K = solve_dare(A, B, Q, np.asarray(cfg.input_weight))
            self.gains.append(K[0])
        self.gains = np.array(self.gains)
        self.integral = np.zeros(len(self.gains))

    def reset(self) -> None:
        self.integral = np.zeros(len(self.gains))

    def step(self, r2, r2_rate, y2, y1) -> np.ndarray:
        e_p = np.asarray(y2) - np.asarray(r2)
        e_v = np.asarray(y1) - np.asarray(r2_rate)
        command = np.asarray(r2) - (
            self.gains[:, 0] * e_p + self.gains[:, 1] * e_v + self.gains[:, 2] * self.integral
        )
        self.integral = self.integral + self.cfg.sample_period * e_p
        return command


# --- Step-response identification ---
def fit_step_response(record: StepRecord, order: int = 2) -> AxisFit:
    """
    Least-squares x(k+1) = A x(k) + B r(k). Order 2 uses x = [position,
    velocity]; order 1 uses position alone. The residual is the RMS of the
    one-step position prediction error.
    """
    p, v, r = record.position, record.velocity, record.reference
    if order == 2:
        regressors = np.column_stack([p[:-1], v[:-1], r[:-1]])
        targets = np.column_stack([p[1:], v[1:]])
    elif order == 1:
        regressors = np.column_stack([p[:-1], r[:-1]])
        targets = p[1:, None]
    else:
        raise LtiError(f"unsupported model order {order}")
    theta, *_ = np.linalg.lstsq(regressors, targets, rcond=None)
    residual = float(np.sqrt(np.mean((regressors @ theta[:, 0] - p[1:]) ** 2)))

    n = order
    A = theta[:n].T
    B = theta[n:].T
    C = np.zeros((1, n))
    C[0, 0] = 1.0
    model = LtiSystem(a=A, b=B, c=C, d=[[0.0]], dt=record.sample_period)
    return AxisFit(model=model, coefficients=theta.T.ravel(), fit_residual=residual)


StepExperiment = Callable[[int, float, float], StepRecord]


def identify_step_response(
    experiment: StepExperiment,
    axis: int,
    step_size: float,
    duration: float,
    order: int = 2,
) -> AxisFit:
    """Runs one closed-loop step experiment on `axis` and fits the model."""
    record = experiment(axis, step_size, duration)
    fit = fit_step_response(record, order)
    radius = float(np.max(np.abs(lti_service.poles(fit.model))))
    if radius >= 1.0:
        raise IdentificationError(
            f"identified model for axis {axis} is unstable (spectral radius {radius:.6g})",
            diagnostics={
                "axis": axis,
                "spectral_radius": radius,
                "coefficients": fit.coefficients.tolist(),
                "fit_residual": fit.fit_residual,
            },
        )
    logger.info(
        f"identified axis {axis}: spectral radius {radius:.4f}, residual {fit.fit_residual:.3g}"
    )
    return fit


def identify_axes(
    experiment: StepExperiment, axes: int, step_size: float, duration: float, order: int = 2
) -> IdentifiedModel:
    fits = [identify_step_response(experiment, i, step_size, duration, order) for i in range(axes)]
    return IdentifiedModel(
        axes=[f.model for f in fits], fit_residual=[f.fit_residual for f in fits], order=order
    )


# --- Tuning ---
def coordinate_descent(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    iterations: int = 50,
    initial_step: float = 0.25,
    lower: float = 0.0,
    on_iteration: Optional[Callable[[int, np.ndarray, float], None]] = None,
) -> Tuple[np.ndarray, float]:
    """
    Multiplicative coordinate search: each iteration tries x_i·(1±step) per
    coordinate, keeps improvements, and halves the step when nothing improves.
    """
    x = np.asarray(x0, dtype=float).copy()
    best = float(objective(x))
    step = initial_step
    for iteration in range(iterations):
        improved = False
        for i in range(x.size):
            for factor in (1.0 + step, 1.0 - step):
                trial = x.copy()
                trial[i] = max(lower, trial[i] * factor) if trial[i] != 0 else step
                value = float(objective(trial))
                if value < best:
                    x, best, improved = trial, value, True
                    break
        if not improved:
            step *= 0.5
        if on_iteration is not None:
            on_iteration(iteration, x, best)
    return x, best
