# tests/test_baselines.py
import math

import numpy as np
import pytest
from scipy import linalg

from l1mpc.exceptions import ConvergenceError, IdentificationError, LtiError
from l1mpc.models.baselines import PidState, StepRecord
from l1mpc.schemas.controllers import L1Config, LqrConfig, PidConfig
from l1mpc.services import baseline_service, l1_service, lti_service


def pid(**overrides) -> PidConfig:
    data = dict(axes=1, kp=0.0, ki=0.0, kd=0.0, output_limit=None, sample_period=0.1)
    data.update(overrides)
    return PidConfig(**data)


# --- PID ---
def test_pid_zero_error():
    controller = baseline_service.PidController(pid(kp=1.0, ki=1.0, kd=1.0))
    for _ in range(5):
        assert np.allclose(controller.step([0.0]), [0.0])


def test_pid_proportional():
    out = baseline_service.pid_step(pid(kp=2.0), PidState.zeros(1), [0.3])
    assert out[0] == pytest.approx(0.6)


def test_pid_integrator_ramp():
    cfg = pid(ki=1.0)
    state = PidState.zeros(1)
    for _ in range(10):
        out = baseline_service.pid_step(cfg, state, [1.0])
    assert out[0] == pytest.approx(1.0)


def test_pid_derivative_starts_at_zero():
    cfg = pid(kd=1.0, derivative_filter_cutoff=5.0)
    state = PidState.zeros(1)
    assert baseline_service.pid_step(cfg, state, [1.0])[0] == 0.0
    out = baseline_service.pid_step(cfg, state, [2.0])
    alpha = math.exp(-5.0 * 0.1)
    assert out[0] == pytest.approx((1.0 - alpha) * 10.0)


def test_pid_anti_windup_bounds_the_integrator():
    cfg = pid(ki=2.0, output_limit=1.0)
    state = PidState.zeros(1)
    for _ in range(1000):
        out = baseline_service.pid_step(cfg, state, [5.0])
    assert abs(state.integral[0]) <= 1.0 / 2.0 + 1e-12
    assert out[0] == pytest.approx(1.0)


def test_pid_reset():
    controller = baseline_service.PidController(pid(ki=1.0))
    controller.step([1.0])
    controller.reset()
    assert np.allclose(controller.state.integral, 0.0)


def test_inner_defaults_differ_from_outer():
    inner = PidConfig.inner_defaults()
    assert inner.kp != PidConfig().kp
    assert PidConfig.inner_defaults(kp=0.5).kp == [0.5, 0.5, 0.5]


# --- DARE / LQR ---
def test_dare_golden_ratio():
    P, K = baseline_service.solve_dare(1.0, 1.0, 1.0, 1.0)
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    assert P[0, 0] == pytest.approx(golden, abs=1e-9)
    assert K[0, 0] == pytest.approx(golden / (1.0 + golden), abs=1e-9)


def test_dare_memoryless_plant():
    P, K = baseline_service.solve_dare(0.0, 1.0, 1.0, 1.0)
    assert P[0, 0] == pytest.approx(1.0)
    assert K[0, 0] == pytest.approx(0.0)


def test_dare_vanishing_state_cost():
    P, K = baseline_service.solve_dare(0.5, 1.0, 1e-12, 1.0)
    assert P[0, 0] < 1e-11
    assert abs(K[0, 0]) < 1e-11


def test_dare_random_systems(rng):
    for _ in range(200):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.5, 1.2) / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-6)
        B = rng.standard_normal((n, m))
        Q = np.eye(n)
        R = np.eye(m)
        P, K = baseline_service.solve_dare(A, B, Q, R)
        assert baseline_service.dare_residual(A, B, Q, R, P) <= 1e-9 * max(1.0, np.max(np.abs(P)))
        assert np.max(np.abs(np.linalg.eigvals(A - B @ K))) < 1.0
        assert np.allclose(P, linalg.solve_discrete_are(A, B, Q, R), rtol=1e-6, atol=1e-8)


def test_dare_diverges_for_unstabilizable_pair():
    with pytest.raises(ConvergenceError):
        baseline_service.solve_dare(2.0, 0.0, 1.0, 1.0, max_iterations=2000)


def test_dare_dimension_check():
    with pytest.raises(LtiError):
        baseline_service.solve_dare(np.eye(2), np.ones((3, 1)), np.eye(2), 1.0)


def test_lqr_on_the_ideal_axis_model_is_stabilizing():
    cfg = LqrConfig()
    models = [l1_service.ideal_axis_model(L1Config(), i) for i in range(3)]
    controller = baseline_service.LqrController(cfg, models)
    assert controller.gains.shape == (3, 3)
    disc = lti_service.discretize_zoh(models[0], cfg.sample_period)
    A, B = baseline_service.integral_augmented(disc)
    assert np.max(np.abs(np.linalg.eigvals(A - B @ controller.gains[:1]))) < 1.0


def test_lqr_on_target_commands_the_target():
    controller = baseline_service.LqrController(
        LqrConfig(), [l1_service.ideal_axis_model(L1Config(), i) for i in range(3)]
    )
    target = np.array([1.0, -1.0, 2.0])
    command = controller.step(target, np.zeros(3), target, np.zeros(3))
    assert np.allclose(command, target)
    assert np.allclose(controller.integral, 0.0)


# --- Identification ---
TRUE_A = np.array([[1.0, 0.01], [-0.02, 0.97]])
TRUE_B = np.array([[0.0005], [0.02]])


def synthetic_record(a, b, samples=400, step_at=20, step_size=0.5, noise=0.0, seed=0) -> StepRecord:
    rng = np.random.default_rng(seed)
    x = np.zeros(a.shape[0])
    reference = np.where(np.arange(samples) >= step_at, step_size, 0.0)
    states = []
    for r in reference:
        states.append(x.copy())
        x = a @ x + b[:, 0] * r
    states = np.array(states)
    velocity = states[:, 1] if a.shape[0] == 2 else np.zeros(samples)
    return StepRecord(
        sample_period=0.01,
        reference=reference,
        position=states[:, 0] + noise * rng.standard_normal(samples),
        velocity=velocity + noise * rng.standard_normal(samples),
    )


def test_noise_free_identification_recovers_the_model():
    fit = baseline_service.fit_step_response(synthetic_record(TRUE_A, TRUE_B))
    assert np.allclose(fit.model.a, TRUE_A, atol=1e-6)
    assert np.allclose(fit.model.b, TRUE_B, atol=1e-6)
    assert fit.fit_residual < 1e-9


def test_noisy_identification_stays_close():
    fit = baseline_service.fit_step_response(synthetic_record(TRUE_A, TRUE_B, samples=2000, noise=1e-4, seed=3))
    assert np.allclose(fit.model.a, TRUE_A, atol=0.05)
    assert fit.fit_residual < 5e-4


def test_second_order_fit_nests_first_order():
    record = synthetic_record(TRUE_A, TRUE_B)
    first = baseline_service.fit_step_response(record, order=1)
    second = baseline_service.fit_step_response(record, order=2)
    assert second.fit_residual <= first.fit_residual + 1e-12


def test_unstable_fit_reports_diagnostics():
    unstable = np.array([[1.02, 0.01], [0.0, 1.01]])

    def experiment(axis, step_size, duration):
        return synthetic_record(unstable, TRUE_B, samples=200)

    with pytest.raises(IdentificationError) as info:
        baseline_service.identify_step_response(experiment, 0, 0.5, 2.0)
    assert info.value.diagnostics["spectral_radius"] >= 1.0


def test_identify_axes_is_deterministic():
    def experiment(axis, step_size, duration):
        return synthetic_record(TRUE_A, TRUE_B, step_size=step_size, noise=1e-4, seed=axis)

    first = baseline_service.identify_axes(experiment, 3, 0.5, 4.0)
    second = baseline_service.identify_axes(experiment, 3, 0.5, 4.0)
    assert len(first.axes) == 3
    for a, b in zip(first.axes, second.axes):
        assert np.array_equal(a.a, b.a)


def test_short_record_rejected():
    with pytest.raises(LtiError):
        StepRecord(
            sample_period=0.01,
            reference=np.array([0.0, 1.0, 1.0]),
            position=np.array([0.0, 0.0, 1.0]),
            velocity=np.array([0.0, 0.0, 1.0]),
        )


# --- Tuning search ---
def test_coordinate_descent_improves_a_quadratic():
    def objective(x):
        return float((x[0] - 2.0) ** 2 + (x[1] - 0.5) ** 2)

    seen = []
    x, best = baseline_service.coordinate_descent(
        objective, [1.0, 1.0], iterations=60, on_iteration=lambda i, x, b: seen.append(b)
    )
    assert best < 1e-3
    assert len(seen) == 60
    assert all(later <= earlier for earlier, later in zip(seen, seen[1:]))
