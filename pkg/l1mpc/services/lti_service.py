# l1mpc/services/lti_service.py
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, linalg, signal

from l1mpc.configs import section
from l1mpc.exceptions import IllPosedFeedbackError, LtiError, UnstableSystemError
from l1mpc.models.lti import (
    ArrayLike,
    FirstOrderTF,
    L1NormResult,
    LtiRunner,
    LtiSystem,
    TransferFunction,
)

logger = logging.getLogger(__name__)

LTI_CONFIG = section("lti")


# --- Realization ---
def realize(tf: TransferFunction) -> LtiSystem:
    """Controllable canonical realization of a proper SISO transfer function."""
    if not tf.is_proper:
        raise LtiError("cannot realize an improper transfer function")
    if tf.order == 0:
        return LtiSystem.static([[tf.num[-1] / tf.den[0]]])
    a, b, c, d = signal.tf2ss(tf.num, tf.den)
    return LtiSystem(a=a, b=b, c=c, d=d)


def first_order(tf: FirstOrderTF) -> LtiSystem:
    return realize(TransferFunction.first_order(tf))


def to_transfer_function(sys: LtiSystem) -> TransferFunction:
    if sys.is_discrete or sys.n_inputs != 1 or sys.n_outputs != 1:
        raise LtiError("transfer-function conversion needs a continuous SISO system")
    if sys.order == 0:
        return TransferFunction.constant(float(sys.d[0, 0]))
    num, den = signal.ss2tf(sys.a, sys.b, sys.c, sys.d)
    return TransferFunction(num=num[0], den=den)


# --- Discretization ---
def discretize_zoh(sys: LtiSystem, step: float) -> LtiSystem:
    """
    Exact zero-order-hold equivalent via the block exponential
    expm([[A, B], [0, 0]] * step) = [[A_d, B_d], [0, I]].
    """
    if sys.is_discrete:
        raise LtiError("system is already discrete")
    if not (math.isfinite(step) and step > 0):
        raise LtiError(f"step must be positive and finite, got {step}")
    n, m = sys.order, sys.n_inputs
    block = np.zeros((n + m, n + m))
    block[:n, :n] = sys.a
    block[:n, n:] = sys.b
    phi = linalg.expm(block * step)
    return LtiSystem(a=phi[:n, :n], b=phi[:n, n:], c=sys.c, d=sys.d, dt=step)


def resample_zoh(sys: LtiSystem, factor: int) -> LtiSystem:
    """Discrete ZOH model at `factor` times the sample period (input held throughout)."""
    if not sys.is_discrete:
        raise LtiError("resampling needs a discrete system")
    if factor < 1:
        raise LtiError("resampling factor must be a positive integer")
    a = np.linalg.matrix_power(sys.a, factor)
    b = sum(np.linalg.matrix_power(sys.a, i) @ sys.b for i in range(factor))
    return LtiSystem(a=a, b=b, c=sys.c, d=sys.d, dt=sys.dt * factor)


# --- Analysis ---
def poles(sys: LtiSystem) -> np.ndarray:
    return np.linalg.eigvals(sys.a) if sys.order else np.zeros(0, dtype=complex)


def is_stable(sys: LtiSystem) -> bool:
    p = poles(sys)
    if p.size == 0:
        return True
    if sys.is_discrete:
        return bool(np.max(np.abs(p)) < 1.0)
    return bool(np.max(p.real) < 0.0)


def dc_gain(sys: LtiSystem) -> np.ndarray:
    if sys.order == 0:
        return sys.d.copy()
    n = sys.order
    if sys.is_discrete:
        return sys.c @ np.linalg.solve(np.eye(n) - sys.a, sys.b) + sys.d
    return sys.d - sys.c @ np.linalg.solve(sys.a, sys.b)


def frequency_response(sys: LtiSystem, omega: ArrayLike) -> np.ndarray:
    """Complex response with shape (len(omega), outputs, inputs)."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    points = np.exp(1j * omega * sys.dt) if sys.is_discrete else 1j * omega
    n = sys.order
    out = np.empty((omega.size, sys.n_outputs, sys.n_inputs), dtype=complex)
    for k, s in enumerate(points):
        if n:
            out[k] = sys.c @ np.linalg.solve(s * np.eye(n) - sys.a, sys.b) + sys.d
        else:
            out[k] = sys.d
    return out


# --- Interconnection ---
def _check_domains(a: LtiSystem, b: LtiSystem) -> Optional[float]:
    if a.dt != b.dt:
        raise LtiError(f"cannot connect systems with sample periods {a.dt} and {b.dt}")
    return a.dt


def series(a: LtiSystem, b: LtiSystem) -> LtiSystem:
    """`a` feeds `b`: y = b(a(u))."""
    dt = _check_domains(a, b)
    if a.n_outputs != b.n_inputs:
        raise LtiError(f"series: {a.n_outputs} outputs feed {b.n_inputs} inputs")
    na, nb = a.order, b.order
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.a
    A[na:, :na] = b.b @ a.c
    A[na:, na:] = b.a
    B = np.vstack([a.b, b.b @ a.d])
    C = np.hstack([b.d @ a.c, b.c])
    D = b.d @ a.d
    return LtiSystem(a=A, b=B, c=C, d=D, dt=dt)


def parallel(a: LtiSystem, b: LtiSystem, sign: float = 1.0) -> LtiSystem:
    """y = a(u) + sign * b(u)."""
    dt = _check_domains(a, b)
    if (a.n_inputs, a.n_outputs) != (b.n_inputs, b.n_outputs):
        raise LtiError("parallel: systems must share input and output dimensions")
    A = _block([a.a, b.a])
    B = np.vstack([a.b, b.b])
    C = np.hstack([a.c, sign * b.c])
    D = a.d + sign * b.d
    return LtiSystem(a=A, b=B, c=C, d=D, dt=dt)


def feedback(a: LtiSystem, b: LtiSystem, sign: float = -1.0) -> LtiSystem:
    """
    Closed loop y = a(r + sign * b(y)). Rejected when I - sign * D_a D_b is
    singular (algebraic loop through the feedthroughs).
    """
    dt = _check_domains(a, b)
    if b.n_inputs != a.n_outputs or b.n_outputs != a.n_inputs:
        raise LtiError("feedback: dimensions of forward and return paths disagree")
    loop = np.eye(a.n_outputs) - sign * a.d @ b.d
    if np.linalg.cond(loop) > 1e12:
        raise IllPosedFeedbackError("feedback interconnection is ill-posed")
    m = np.linalg.inv(loop)
    # outputs of a and inputs of a as maps of [x_a, x_b, r]
    ya_xa, ya_xb, ya_r = m @ a.c, sign * m @ a.d @ b.c, m @ a.d
    ua_xa = sign * b.d @ ya_xa
    ua_xb = sign * b.c + sign * b.d @ ya_xb
    ua_r = np.eye(a.n_inputs) + sign * b.d @ ya_r
    na, nb = a.order, b.order
    A = np.zeros((na + nb, na + nb))
    A[:na, :na] = a.a + a.b @ ua_xa
    A[:na, na:] = a.b @ ua_xb
    A[na:, :na] = b.b @ ya_xa
    A[na:, na:] = b.a + b.b @ ya_xb
    B = np.vstack([a.b @ ua_r, b.b @ ya_r])
    C = np.hstack([ya_xa, ya_xb])
    return LtiSystem(a=A, b=B, c=C, d=ya_r, dt=dt)


def block_diagonal(systems: Sequence[LtiSystem]) -> LtiSystem:
    """Diagonal stacking: input i drives only subsystem i."""
    if not systems:
        raise LtiError("nothing to stack")
    dt = systems[0].dt
    for sys in systems[1:]:
        _check_domains(systems[0], sys)
    return LtiSystem(
        a=_block([s.a for s in systems]),
        b=_block([s.b for s in systems]),
        c=_block([s.c for s in systems]),
        d=_block([s.d for s in systems]),
        dt=dt,
    )


def _block(mats) -> np.ndarray:
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols))
    r = c = 0
    for mat in mats:
        out[r:r + mat.shape[0], c:c + mat.shape[1]] = mat
        r += mat.shape[0]
        c += mat.shape[1]
    return out


def step(runner: LtiRunner, u: ArrayLike) -> np.ndarray:
    return runner.step(u)


def simulate(sys: LtiSystem, inputs: ArrayLike, state: Optional[ArrayLike] = None) -> np.ndarray:
    """Runs a discrete system over an (N, m) input sequence; returns (N, p) outputs."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    runner = LtiRunner(sys, state)
    return np.array([runner.step(u) for u in inputs])


# --- L1 norm ---
def _time_constants(eigs: np.ndarray) -> tuple:
    decay = np.abs(eigs.real)
    slow = 1.0 / np.min(decay)
    fast = 1.0 / np.max(np.abs(eigs))
    return slow, fast


def _decay_bound(a: np.ndarray, alpha: float) -> tuple:
    """
    Constants (kappa, beta) with ||exp(A t)|| <= kappa * exp(-beta t), from a
    Lyapunov function of A shifted by beta = alpha / 2.
    """
    beta = 0.5 * alpha
    shifted = a + beta * np.eye(a.shape[0])
    p = linalg.solve_continuous_lyapunov(shifted.T, -np.eye(a.shape[0]))
    p = 0.5 * (p + p.T)
    eig = np.linalg.eigvalsh(p)
    return math.sqrt(eig[-1] / eig[0]), beta


def l1_norm(
    sys: LtiSystem,
    horizon: Optional[float] = None,
    step: Optional[float] = None,
) -> L1NormResult:
    """
    ‖G‖_L1 of a stable continuous system: trapezoidal quadrature of |C e^{At} B|
    over [0, horizon], plus |D|, plus an exponential bound on the tail beyond
    horizon. MIMO systems use the induced infinity norm (max row sum).
    """
    if sys.is_discrete:
        raise LtiError("l1_norm is defined here for continuous systems")
    if sys.order == 0:
        value = float(np.max(np.sum(np.abs(sys.d), axis=1)))
        return L1NormResult(
            value=value, quadrature=0.0, tail_bound=0.0, horizon=0.0, step=0.0,
            horizon_sufficient=True,
        )
    eigs = poles(sys)
    if np.max(eigs.real) >= 0.0:
        raise UnstableSystemError("L1 norm undefined", poles=eigs)

    tau_slow, tau_fast = _time_constants(eigs)
    resolution = float(LTI_CONFIG.get("l1_norm_resolution", 1000))
    if horizon is None:
        horizon = float(LTI_CONFIG.get("l1_norm_horizon_factor", 20.0)) * tau_slow
    if step is None:
        step = min(tau_slow / resolution, tau_fast / 10.0)
    max_points = int(LTI_CONFIG.get("max_quadrature_points", 400000))
    n_steps = int(math.ceil(horizon / step))
    if n_steps > max_points:
        n_steps = max_points
        logger.debug(f"l1_norm quadrature capped at {max_points} points")
    step = horizon / n_steps

    sufficient = horizon >= float(LTI_CONFIG.get("min_horizon_factor", 10.0)) * tau_slow
    if not sufficient:
        logger.warning(
            f"l1_norm horizon {horizon:.4g}s covers fewer than "
            f"{LTI_CONFIG.get('min_horizon_factor', 10.0)} slowest time constants ({tau_slow:.4g}s)"
        )

    phi = linalg.expm(sys.a * step)
    x = sys.b.copy()
    samples = np.empty((n_steps + 1, sys.n_outputs, sys.n_inputs))
    for k in range(n_steps + 1):
        samples[k] = np.abs(sys.c @ x)
        if k < n_steps:
            x = phi @ x
    quad = integrate.trapezoid(samples, dx=step, axis=0)

    kappa, beta = _decay_bound(sys.a, float(np.min(np.abs(eigs.real))))
    c_norms = np.linalg.norm(sys.c, axis=1)
    x_norms = np.linalg.norm(x, axis=0)
    tail = np.outer(c_norms, x_norms) * kappa / beta

    rows = quad + tail + np.abs(sys.d)
    worst = int(np.argmax(np.sum(rows, axis=1)))
    return L1NormResult(
        value=float(np.sum(rows[worst])),
        quadrature=float(np.sum(quad[worst])),
        tail_bound=float(np.sum(tail[worst])),
        horizon=float(horizon),
        step=float(step),
        horizon_sufficient=bool(sufficient),
    )
