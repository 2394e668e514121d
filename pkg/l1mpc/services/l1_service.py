# l1mpc/services/l1_service.py
import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from l1mpc.exceptions import L1MpcError, LtiError
from l1mpc.models.l1 import L1State, NormConditionReport
from l1mpc.models.lti import FirstOrderTF, LtiRunner, LtiSystem, TransferFunction
from l1mpc.schemas.controllers import L1Config
from l1mpc.services import lti_service

logger = logging.getLogger(__name__)


def reference_model(cfg: L1Config) -> LtiSystem:
    """Diagonal M(s) = diag(m_i / (s + m_i)), continuous."""
    return lti_service.block_diagonal(
        [lti_service.first_order(FirstOrderTF(pole=m)) for m in cfg.ref_poles]
    )


def filter_model(cfg: L1Config, axis: int) -> LtiSystem:
    return lti_service.first_order(FirstOrderTF(pole=cfg.filter_cutoffs[axis]))


def init_state(cfg: L1Config) -> L1State:
    predictor = lti_service.discretize_zoh(reference_model(cfg), cfg.sample_period)
    filters = [
        LtiRunner(lti_service.discretize_zoh(filter_model(cfg, i), cfg.sample_period))
        for i in range(cfg.axes)
    ]
    return L1State(
        sigma_hat=np.zeros(cfg.axes),
        predictor=LtiRunner(predictor),
        filter_runners=filters,
        last_output=np.zeros(cfg.axes),
        estimation_error=np.zeros(cfg.axes),
    )


def _vector(value, n: int, name: str) -> np.ndarray:
    value = np.array(value, dtype=float).reshape(-1)
    if value.shape != (n,):
        raise LtiError(f"{name} must have {n} entries, got {value.size}")
    if not np.all(np.isfinite(value)):
        raise LtiError(f"{name} has non-finite entries")
    return value


def predictor_step(cfg: L1Config, st: L1State, u) -> np.ndarray:
    """ŷ1 advanced one sample with (u + σ̂) held."""
    u = _vector(u, cfg.axes, "u")
    st.predictor.step(u + st.sigma_hat)
    return st.predictor_state


def adapt_step(cfg: L1Config, st: L1State, y1_meas) -> np.ndarray:
    """
    One forward-Euler step of σ̂' = Γ Proj(σ̂, -ỹ), ỹ = ŷ1 - y1. The projection
    zeroes the derivative on axes sitting on the bound and pushing outward.
    """
    y1_meas = _vector(y1_meas, cfg.axes, "y1")
    bound = np.asarray(cfg.proj_bound)
    error = st.predictor_state - y1_meas
    rate = -cfg.adaptation_gain * error
    outward = ((st.sigma_hat >= bound) & (rate > 0)) | ((st.sigma_hat <= -bound) & (rate < 0))
    rate = np.where(outward, 0.0, rate)
    candidate = st.sigma_hat + cfg.sample_period * rate
    clipped = np.clip(candidate, -bound, bound)
    saturated = int(np.count_nonzero(outward | (clipped != candidate)))
    if saturated:
        st.saturation_count += saturated
        logger.debug(f"projection active on {saturated} axes")
    st.sigma_hat = clipped
    st.estimation_error = error
    return st.sigma_hat.copy()


def control_step(cfg: L1Config, st: L1State, r1) -> np.ndarray:
    """u_L1 = C(s)(r1 - σ̂), one discretized filter per axis."""
    r1 = _vector(r1, cfg.axes, "r1")
    drive = r1 - st.sigma_hat
    u = np.array(
        [runner.step([drive[i]])[0] for i, runner in enumerate(st.filter_runners)]
    )
    st.last_output = u
    return u.copy()


def outer_loop(cfg: L1Config, r2, y2) -> np.ndarray:
    """r1 = K (r2 - y2), elementwise."""
    r2 = _vector(r2, cfg.axes, "r2")
    y2 = _vector(y2, cfg.axes, "y2")
    return np.asarray(cfg.outer_gains) * (r2 - y2)


def ideal_axis_model(cfg: L1Config, axis: int) -> LtiSystem:
    """
    Ideal closed loop of one axis: m/(s+m) from r1 when K = 0, otherwise
    K m / (s^2 + m s + K m) from r2 in state [position; velocity].
    """
    m = cfg.ref_poles[axis]
    k = cfg.outer_gains[axis]
    if k == 0:
        return lti_service.first_order(FirstOrderTF(pole=m))
    return LtiSystem(
        a=[[0.0, 1.0], [-k * m, -m]],
        b=[[0.0], [k * m]],
        c=[[1.0, 0.0]],
        d=[[0.0]],
    )


def ideal_response_model(cfg: L1Config) -> LtiSystem:
    return lti_service.block_diagonal([ideal_axis_model(cfg, i) for i in range(cfg.axes)])


def simulate_ideal_response(cfg: L1Config, r2) -> np.ndarray:
    """Drives the discretized ideal model with a recorded (N, axes) reference."""
    r2 = np.asarray(r2, dtype=float)
    continuous = ideal_response_model(cfg)
    model = lti_service.discretize_zoh(continuous, cfg.sample_period)
    runner = LtiRunner(model)
    # start at the equilibrium of the first reference sample
    runner.reset(np.linalg.solve(-continuous.a, continuous.b @ r2[0]))
    outputs = [model.c @ runner.state]
    for k in range(len(r2) - 1):
        outputs.append(runner.step(r2[k]))
    return np.array(outputs)


def _filter_over_model(m: float, omega: float) -> LtiSystem:
    """C/M = (ω/m)(s + m)/(s + ω)."""
    return lti_service.realize(TransferFunction(num=[omega / m, omega], den=[1.0, omega]))


def closed_loop_h(plant: LtiSystem, m: float, omega: float) -> LtiSystem:
    """
    H = A M / (C A + (1 - C) M) as the loop A/(1 - C) closed through C/M.
    The realization carries one hidden mode at -omega.
    """
    # 1/(1 - C) = (s + ω)/s, proper
    integrating = lti_service.realize(TransferFunction(num=[1.0, omega], den=[1.0, 0.0]))
    return lti_service.feedback(lti_service.series(plant, integrating), _filter_over_model(m, omega))


def check_norm_condition(
    plant: Union[LtiSystem, Sequence[LtiSystem]],
    cfg: L1Config,
    L: float,
) -> NormConditionReport:
    """
    ‖G‖_L1 · L < 1 with G = H (1 - C), checked per axis; the worst axis is
    reported. `plant` is one continuous SISO stand-in for every axis or one
    per axis.
    """
    if L < 0:
        raise LtiError("Lipschitz constant must be non-negative")
    plants = list(plant) if isinstance(plant, (list, tuple)) else [plant] * cfg.axes
    if len(plants) != cfg.axes:
        raise LtiError(f"need {cfg.axes} plant models, got {len(plants)}")

    g_norms, gamma_factors, sufficient = [], [], True
    h_stable = True
    for axis, sys in enumerate(plants):
        h_ss = closed_loop_h(sys, cfg.ref_poles[axis], cfg.filter_cutoffs[axis])
        if not lti_service.is_stable(h_ss):
            logger.warning(f"H(s) unstable on axis {axis}: poles {lti_service.poles(h_ss)}")
            h_stable = False
            g_norms.append(math.inf)
            gamma_factors.append(None)
            continue
        c_ss = filter_model(cfg, axis)
        one_minus_c = lti_service.parallel(LtiSystem.static([[1.0]]), c_ss, sign=-1.0)
        G = lti_service.series(h_ss, one_minus_c)
        result = lti_service.l1_norm(G)
        sufficient = sufficient and result.horizon_sufficient
        g_norms.append(result.value)
        gamma_factors.append(_gamma1_factor(h_ss, cfg, axis, result.value * L))

    worst = int(np.argmax(g_norms))
    g_norm = g_norms[worst]
    if not h_stable:
        product = math.inf
    else:
        product = g_norm * L
    report = NormConditionReport(
        g_norm=g_norm,
        lipschitz_L=L,
        product=product,
        satisfied=bool(h_stable and product < 1.0),
        h_stable=h_stable,
        axis=worst,
        per_axis_g_norm=g_norms,
        gamma1_factor=gamma_factors[worst],
        horizon_sufficient=sufficient,
    )
    logger.info(
        f"norm condition: ‖G‖={g_norm:.6g} L={L:.6g} product={product:.6g} "
        f"satisfied={report.satisfied}"
    )
    return report


def _gamma1_factor(h_ss: LtiSystem, cfg: L1Config, axis: int, product: float) -> Optional[float]:
    """‖C H / M‖_L1 / (1 - ‖G‖ L): estimation-to-output error multiplier."""
    if product >= 1.0:
        return None
    ratio = lti_service.series(h_ss, _filter_over_model(cfg.ref_poles[axis], cfg.filter_cutoffs[axis]))
    try:
        norm = lti_service.l1_norm(ratio).value
    except L1MpcError:
        return None
    return norm / (1.0 - product)


class L1AdaptiveController:
    """
    Full control cycle per sample: adapt on the measured velocity, form r1
    (outer proportional loop on axes with K_i > 0), filter, then advance the
    predictor with the new σ̂.
    """

    def __init__(self, cfg: L1Config):
        self.cfg = cfg
        self.state = init_state(cfg)
        self._extended = cfg.extended
        self.max_estimation_error = np.zeros(cfg.axes)

    def reset(self, y1: Optional[np.ndarray] = None) -> None:
        self.state = init_state(self.cfg)
        if y1 is not None:
            c = self.state.predictor.system.c
            self.state.predictor.reset(np.linalg.solve(c, np.asarray(y1, dtype=float)))
        self.max_estimation_error = np.zeros(self.cfg.axes)

    def step(self, y1, reference, y2=None) -> np.ndarray:
        adapt_step(self.cfg, self.state, y1)
        self.max_estimation_error = np.maximum(
            self.max_estimation_error, np.abs(self.state.estimation_error)
        )
        reference = np.asarray(reference, dtype=float)
        if np.any(self._extended):
            if y2 is None:
                raise LtiError("extended L1 loop needs the position measurement y2")
            r1 = np.where(self._extended, outer_loop(self.cfg, reference, y2), reference)
        else:
            r1 = reference
        u = control_step(self.cfg, self.state, r1)
        predictor_step(self.cfg, self.state, u)
        return u

    @property
    def sigma_hat(self) -> np.ndarray:
        return self.state.sigma_hat.copy()

    @property
    def predicted_output(self) -> np.ndarray:
        return self.state.predictor_state

    @property
    def estimation_error(self) -> np.ndarray:
        return self.state.estimation_error.copy()
