# l1mpc/services/plant_service.py
import logging
import math
from collections import deque
from typing import Optional, Tuple

import numpy as np

from l1mpc.configs import section
from l1mpc.exceptions import LtiError, SimulationAbort
from l1mpc.models.lti import LtiSystem, TransferFunction
from l1mpc.models.plant import Command, VehicleState
from l1mpc.schemas.plant import PlantParams, WindModel
from l1mpc.services import lti_service

logger = logging.getLogger(__name__)

BENCH_CONFIG = section("bench")

# turbulence: sum of seeded sinusoids, normalized to unit RMS
TURBULENCE_COMPONENTS = 8
TURBULENCE_BAND_HZ = (0.1, 2.0)


def attitude_transform(u_l1, yaw: float, params: Optional[PlantParams] = None) -> Command:
    """
    φ_des = -asin(-u_x sinψ + u_y cosψ), θ_des = asin(u_x cosψ + u_y sinψ),
    ż_des = u_z, ψ̇_des = -k_ψ ψ. Arguments of asin beyond ±sin(max_tilt) are
    clamped and counted.
    """
    params = params or PlantParams()
    u = np.asarray(u_l1, dtype=float).reshape(3)
    s, c = math.sin(yaw), math.cos(yaw)
    lateral = -u[0] * s + u[1] * c
    forward = u[0] * c + u[1] * s
    limit = math.sin(params.max_tilt)
    clamped = 0
    if abs(lateral) > limit:
        lateral = math.copysign(limit, lateral)
        clamped += 1
    if abs(forward) > limit:
        forward = math.copysign(limit, forward)
        clamped += 1
    vz = float(u[2])
    if abs(vz) > params.max_vz:
        vz = math.copysign(params.max_vz, vz)
        clamped += 1
    return Command(
        roll_des=-math.asin(lateral),
        pitch_des=math.asin(forward),
        vz_des=vz,
        yawrate_des=-params.yaw_gain * yaw,
        clamped=clamped,
    )


class WindField:
    """Evaluates a WindModel as a force in newtons; turbulence is drawn once from the seed."""

    def __init__(self, wind: WindModel):
        self.wind = wind
        self.direction = np.asarray(wind.direction)
        if wind.kind == "turbulent":
            rng = np.random.default_rng(wind.noise_seed)
            low, high = TURBULENCE_BAND_HZ
            self.frequencies = 2.0 * math.pi * rng.uniform(low, high, TURBULENCE_COMPONENTS)
            self.phases = rng.uniform(0.0, 2.0 * math.pi, TURBULENCE_COMPONENTS)
            weights = rng.uniform(0.5, 1.0, TURBULENCE_COMPONENTS)
            # RMS of Σ a_k sin(...) is sqrt(Σ a_k² / 2)
            self.amplitudes = weights / math.sqrt(0.5 * float(np.sum(weights ** 2)))

    def force(self, t: float, position) -> np.ndarray:
        wind = self.wind
        if not wind.active_at(t):
            return np.zeros(3)
        if wind.kind == "constant":
            return wind.magnitude * self.direction
        if wind.kind == "gust_region":
            if wind.region is None or not wind.region.contains(position):
                return np.zeros(3)
            return wind.magnitude * self.direction
        if wind.kind == "turbulent":
            fluctuation = float(np.sum(self.amplitudes * np.sin(self.frequencies * t + self.phases)))
            return wind.magnitude * (1.0 + wind.intensity * fluctuation) * self.direction
        return np.zeros(3)


def wind_force(wind: WindModel, t: float, position) -> np.ndarray:
    return WindField(wind).force(t, position)


def _coefficients(params: PlantParams) -> tuple:
    return (
        params.effective_mass,
        params.effective_drag,
        params.gravity,
        params.attitude_time_constant,
        params.vz_time_constant,
    )


def _derivative(coeffs: tuple, x: np.ndarray, cmd: np.ndarray, force: np.ndarray) -> np.ndarray:
    """x = [p(3), v(3), φ, θ, ψ]; cmd = [φ_des, θ_des, vz_des, ψ̇_des] already clamped."""
    mass, drag, g, tau_att, tau_z = coeffs
    roll, pitch, yaw = x[6], x[7], x[8]
    a_forward = g * math.tan(pitch)
    a_left = -g * math.tan(roll)
    cy, sy = math.cos(yaw), math.sin(yaw)

    dx = np.empty(9)
    dx[0:3] = x[3:6]
    dx[3] = cy * a_forward - sy * a_left - drag[0] / mass * x[3] + force[0] / mass
    dx[4] = sy * a_forward + cy * a_left - drag[1] / mass * x[4] + force[1] / mass
    dx[5] = (cmd[2] - x[5]) / tau_z - drag[2] / mass * x[5] + force[2] / mass
    dx[6] = (cmd[0] - roll) / tau_att
    dx[7] = (cmd[1] - pitch) / tau_att
    dx[8] = cmd[3]
    return dx


def _clamp_command(params: PlantParams, cmd: Command) -> np.ndarray:
    tilt = params.max_tilt
    return np.array(
        [
            min(max(cmd.roll_des, -tilt), tilt),
            min(max(cmd.pitch_des, -tilt), tilt),
            min(max(cmd.vz_des, -params.max_vz), params.max_vz),
            cmd.yawrate_des,
        ]
    )


def _rk4(coeffs: tuple, x: np.ndarray, cmd: np.ndarray, force: np.ndarray, dt: float) -> np.ndarray:
    k1 = _derivative(coeffs, x, cmd, force)
    k2 = _derivative(coeffs, x + 0.5 * dt * k1, cmd, force)
    k3 = _derivative(coeffs, x + 0.5 * dt * k2, cmd, force)
    k4 = _derivative(coeffs, x + dt * k3, cmd, force)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def plant_step(
    params: PlantParams, state: VehicleState, cmd: Command, wind: WindModel, dt: float
) -> VehicleState:
    """One RK4 step; the wind force is held over the step."""
    if not (0 < dt <= 1e-3 + 1e-15):
        raise LtiError(f"plant step must be in (0, 1 ms], got {dt}")
    x = state.as_vector()
    force = wind_force(wind, state.time, state.position)
    x_next = _rk4(_coefficients(params), x, _clamp_command(params, cmd), force, dt)
    if not np.all(np.isfinite(x_next)):
        raise SimulationAbort(
            f"non-finite vehicle state at t={state.time + dt:.4f}s",
            trace=[x.tolist(), x_next.tolist()],
        )
    return VehicleState.from_vector(x_next, state.time + dt)


class QuadrotorSimulator:
    """
    Stateful plant for closed-loop runs: integrates at params.dt with the
    command held over each controller period, and keeps the controller-rate
    state history for abort dumps.
    """

    def __init__(self, params: PlantParams, wind: WindModel, initial: VehicleState):
        self.params = params
        self.wind = wind
        self.field = WindField(wind)
        self._coeffs = _coefficients(params)
        self._x = initial.as_vector()
        self.time = initial.time
        self.trace = deque(maxlen=int(BENCH_CONFIG.get("trace_length", 5000)))
        self.trace.append([self.time, *self._x.tolist()])

    @property
    def state(self) -> VehicleState:
        return VehicleState.from_vector(self._x, self.time)

    def force_now(self) -> np.ndarray:
        return self.field.force(self.time, self._x[0:3])

    def advance(self, cmd: Command, duration: float) -> VehicleState:
        substeps = int(round(duration / self.params.dt))
        if substeps < 1 or not math.isclose(substeps * self.params.dt, duration, rel_tol=1e-9):
            raise LtiError(
                f"controller period {duration} is not a multiple of the plant step {self.params.dt}"
            )
        u = _clamp_command(self.params, cmd)
        x = self._x
        t0 = self.time
        for i in range(substeps):
            t = t0 + i * self.params.dt
            force = self.field.force(t, x[0:3])
            x = _rk4(self._coeffs, x, u, force, self.params.dt)
        if not np.all(np.isfinite(x)):
            self.trace.append([t0 + duration, *x.tolist()])
            raise SimulationAbort(
                f"non-finite vehicle state at t={t0 + duration:.4f}s", trace=list(self.trace)
            )
        self._x = x
        self.time = t0 + duration
        self.trace.append([self.time, *x.tolist()])
        return self.state


def lipschitz_estimate(wind: WindModel, params: PlantParams) -> Tuple[float, float]:
    """
    L: slope of the velocity-dependent force per unit mass (linear drag).
    L0: bound on the velocity-independent part (wind); turbulence uses the
    3σ envelope of its unit-RMS fluctuation.
    """
    mass = params.effective_mass
    L = float(np.max(params.effective_drag)) / mass
    if wind.kind == "off":
        L0 = 0.0
    elif wind.kind == "turbulent":
        L0 = wind.magnitude * (1.0 + 3.0 * wind.intensity) / mass
    else:
        L0 = wind.magnitude / mass
    return L, L0


def linearized_velocity_model(params: PlantParams, axis: int) -> LtiSystem:
    """
    Small-angle SISO stand-in from L1 output u_i to velocity y1_i:
    g / ((τ s + 1)(s + c/M)) horizontally, (1/τ_z) / (s + 1/τ_z + c_z/M) vertically.
    """
    mass = params.effective_mass
    d = float(params.effective_drag[axis]) / mass
    if axis in (0, 1):
        tau = params.attitude_time_constant
        tf = TransferFunction(num=[params.gravity], den=np.polymul([tau, 1.0], [1.0, d]))
    elif axis == 2:
        tau = params.vz_time_constant
        tf = TransferFunction(num=[1.0 / tau], den=[1.0, 1.0 / tau + d])
    else:
        raise LtiError(f"axis must be 0, 1 or 2, got {axis}")
    return lti_service.realize(tf)
