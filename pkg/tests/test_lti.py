# tests/test_lti.py
import math

import numpy as np
import pytest
from scipy import signal

from l1mpc.exceptions import IllPosedFeedbackError, LtiError, UnstableSystemError
from l1mpc.models.lti import FirstOrderTF, LtiRunner, LtiSystem, TransferFunction
from l1mpc.services import lti_service


def random_stable(rng, order: int) -> LtiSystem:
    eigs = -rng.uniform(0.5, 3.0, order)
    v = np.eye(order) + 0.3 * rng.standard_normal((order, order))
    a = v @ np.diag(eigs) @ np.linalg.inv(v)
    return LtiSystem(
        a=a,
        b=rng.standard_normal((order, 1)),
        c=rng.standard_normal((1, order)),
        d=[[0.0]],
    )


# --- Representations ---
def test_first_order_realization():
    sys = lti_service.first_order(FirstOrderTF(pole=2.0, dc_gain=3.0))
    assert sys.order == 1
    assert np.allclose(lti_service.dc_gain(sys), [[3.0]])
    assert np.allclose(lti_service.poles(sys), [-2.0])


def test_first_order_rejects_non_positive_pole():
    with pytest.raises(ValueError):
        FirstOrderTF(pole=0.0)


def test_non_finite_matrix_rejected():
    with pytest.raises(LtiError):
        LtiSystem(a=[[np.nan]], b=[[1.0]], c=[[1.0]], d=[[0.0]])


def test_inconsistent_dimensions_rejected():
    with pytest.raises(LtiError):
        LtiSystem(a=np.eye(2), b=[[1.0]], c=[[1.0, 0.0]], d=[[0.0]])


def test_transfer_function_arithmetic_and_minreal():
    a = TransferFunction(num=[1.0, 1.0], den=[1.0, 3.0, 2.0])
    reduced = a.minreal()
    assert reduced.order == 1
    assert np.allclose(reduced.poles(), [-2.0])
    total = TransferFunction(num=[1.0], den=[1.0, 1.0]) + TransferFunction(num=[1.0], den=[1.0, 2.0])
    assert np.isclose(total.dc_gain(), 1.5)
    ratio = (a / a).minreal()
    assert ratio.order == 0
    assert np.isclose(ratio.dc_gain(), 1.0)


def test_realization_round_trip_matches_frequency_response():
    tf = TransferFunction(num=[2.0, 1.0], den=[1.0, 3.0, 5.0])
    sys = lti_service.realize(tf)
    omega = np.array([0.0, 0.5, 2.0, 10.0])
    response = lti_service.frequency_response(sys, omega)[:, 0, 0]
    assert np.allclose(response, tf.evaluate(1j * omega))
    back = lti_service.to_transfer_function(sys)
    assert np.allclose(back.evaluate(1j * omega), tf.evaluate(1j * omega))


def test_improper_transfer_function_cannot_be_realized():
    with pytest.raises(LtiError):
        lti_service.realize(TransferFunction(num=[1.0, 0.0, 0.0], den=[1.0, 1.0]))


# --- Discretization ---
def test_zoh_scalar_closed_form():
    sys = LtiSystem(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
    disc = lti_service.discretize_zoh(sys, 0.1)
    assert abs(disc.a[0, 0] - math.exp(-0.1)) <= 1e-12
    assert abs(disc.b[0, 0] - (1.0 - math.exp(-0.1))) <= 1e-12
    assert disc.dt == 0.1


def test_zoh_matches_scipy(rng):
    sys = random_stable(rng, 3)
    disc = lti_service.discretize_zoh(sys, 0.05)
    ad, bd, *_ = signal.cont2discrete((sys.a, sys.b, sys.c, sys.d), 0.05, method="zoh")
    assert np.allclose(disc.a, ad, atol=1e-12)
    assert np.allclose(disc.b, bd, atol=1e-12)


def test_zoh_rejects_bad_step_and_discrete_input():
    sys = LtiSystem(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
    with pytest.raises(LtiError):
        lti_service.discretize_zoh(sys, 0.0)
    with pytest.raises(LtiError):
        lti_service.discretize_zoh(lti_service.discretize_zoh(sys, 0.1), 0.1)


def test_resample_equals_discretizing_at_the_longer_period(rng):
    sys = random_stable(rng, 2)
    fine = lti_service.discretize_zoh(sys, 0.01)
    coarse = lti_service.discretize_zoh(sys, 0.05)
    resampled = lti_service.resample_zoh(fine, 5)
    assert np.allclose(resampled.a, coarse.a, atol=1e-12)
    assert np.allclose(resampled.b, coarse.b, atol=1e-12)
    assert math.isclose(resampled.dt, 0.05)


# --- Runner ---
def test_runner_returns_output_at_new_sample():
    sys = LtiSystem(a=[[0.5]], b=[[1.0]], c=[[2.0]], d=[[0.1]], dt=0.1)
    runner = LtiRunner(sys)
    assert np.allclose(runner.step([1.0]), [2.0 * 1.0 + 0.1])
    assert np.allclose(runner.step([0.0]), [2.0 * 0.5])
    assert np.allclose(runner.state, [0.5])


def test_runner_rejects_continuous_and_bad_input():
    with pytest.raises(LtiError):
        LtiRunner(LtiSystem(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]]))
    runner = LtiRunner(LtiSystem(a=[[0.5]], b=[[1.0]], c=[[1.0]], d=[[0.0]], dt=0.1))
    with pytest.raises(LtiError):
        runner.step([1.0, 2.0])
    with pytest.raises(LtiError):
        runner.step([np.inf])


def test_simulate_step_response_converges_to_dc_gain():
    sys = lti_service.discretize_zoh(lti_service.first_order(FirstOrderTF(pole=5.0)), 0.01)
    outputs = lti_service.simulate(sys, np.ones(500))
    assert abs(outputs[-1, 0] - 1.0) < 1e-9


# --- Interconnection ---
def test_unity_feedback_of_first_order():
    plant = lti_service.first_order(FirstOrderTF(pole=1.0))
    closed = lti_service.feedback(plant, LtiSystem.static([[1.0]]))
    assert np.allclose(lti_service.poles(closed), [-2.0])
    assert np.allclose(lti_service.dc_gain(closed), [[0.5]])


def test_algebraic_loop_is_ill_posed():
    with pytest.raises(IllPosedFeedbackError):
        lti_service.feedback(LtiSystem.static([[1.0]]), LtiSystem.static([[1.0]]), sign=1.0)


def test_series_and_parallel_compose_responses(rng):
    a, b = random_stable(rng, 2), random_stable(rng, 1)
    omega = np.array([0.1, 1.0, 4.0])
    ha = lti_service.frequency_response(a, omega)[:, 0, 0]
    hb = lti_service.frequency_response(b, omega)[:, 0, 0]
    series = lti_service.frequency_response(lti_service.series(a, b), omega)[:, 0, 0]
    diff = lti_service.frequency_response(lti_service.parallel(a, b, sign=-1.0), omega)[:, 0, 0]
    assert np.allclose(series, ha * hb)
    assert np.allclose(diff, ha - hb)


def test_mixed_domains_refused():
    cont = LtiSystem(a=[[-1.0]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
    disc = lti_service.discretize_zoh(cont, 0.1)
    with pytest.raises(LtiError):
        lti_service.series(cont, disc)


def test_block_diagonal_decouples_channels():
    stacked = lti_service.block_diagonal(
        [lti_service.first_order(FirstOrderTF(pole=p)) for p in (1.0, 2.0, 3.0)]
    )
    assert (stacked.n_inputs, stacked.n_outputs, stacked.order) == (3, 3, 3)
    assert np.allclose(lti_service.dc_gain(stacked), np.eye(3))


# --- L1 norm ---
def test_l1_norm_closed_form():
    g = lti_service.realize(TransferFunction(num=[1.0, 0.0], den=[1.0, 2.0, 1.0]))
    result = lti_service.l1_norm(g)
    assert abs(result.value - 2.0 / math.e) <= 1e-4
    assert result.horizon_sufficient


def test_l1_norm_of_first_order_is_its_dc_gain():
    result = lti_service.l1_norm(lti_service.first_order(FirstOrderTF(pole=3.0, dc_gain=2.0)))
    assert abs(result.value - 2.0) <= 1e-5


def test_l1_norm_of_static_gain():
    assert lti_service.l1_norm(LtiSystem.static([[-0.7]])).value == pytest.approx(0.7)


def test_l1_norm_undefined_for_unstable_system():
    unstable = LtiSystem(a=[[0.5]], b=[[1.0]], c=[[1.0]], d=[[0.0]])
    with pytest.raises(UnstableSystemError, match="L1 norm undefined"):
        lti_service.l1_norm(unstable)


def test_short_horizon_is_flagged():
    sys = lti_service.first_order(FirstOrderTF(pole=1.0))
    assert not lti_service.l1_norm(sys, horizon=2.0).horizon_sufficient


def test_l1_norm_properties_on_random_systems(rng):
    for _ in range(100):
        sys = random_stable(rng, int(rng.integers(1, 4)))
        value = lti_service.l1_norm(sys).value
        dc = abs(lti_service.dc_gain(sys)[0, 0])
        assert value >= dc - 1e-6 * (1.0 + dc)
        k = float(rng.uniform(-3.0, 3.0))
        scaled = LtiSystem(a=sys.a, b=sys.b, c=k * sys.c, d=sys.d)
        assert lti_service.l1_norm(scaled).value == pytest.approx(abs(k) * value, rel=1e-9)


def test_zoh_double_integrator():
    sys = LtiSystem(a=[[0.0, 1.0], [0.0, 0.0]], b=[[0.0], [1.0]], c=[[1.0, 0.0]], d=[[0.0]])
    disc = lti_service.discretize_zoh(sys, 1.0)
    assert np.allclose(disc.a, [[1.0, 1.0], [0.0, 1.0]], atol=1e-12)
    assert np.allclose(disc.b, [[0.5], [1.0]], atol=1e-12)


def test_zoh_preserves_stability(rng):
    for _ in range(1000):
        sys = random_stable(rng, int(rng.integers(1, 5)))
        disc = lti_service.discretize_zoh(sys, float(rng.uniform(0.001, 0.5)))
        assert np.max(np.abs(lti_service.poles(disc))) < 1.0


def test_unit_pulse_matches_matrix_powers():
    disc = lti_service.discretize_zoh(lti_service.first_order(FirstOrderTF(pole=1.0)), 0.1)
    runner = LtiRunner(disc)
    u = np.zeros(10)
    u[0] = 1.0
    outputs = [runner.step([v])[0] for v in u]
    a, b, c = disc.a[0, 0], disc.b[0, 0], disc.c[0, 0]
    expected = [c * a ** k * b for k in range(10)]
    assert np.allclose(outputs, expected, atol=1e-12)


def test_one_minus_filter_response():
    c_sys = lti_service.first_order(FirstOrderTF(pole=1.0))
    one_minus = lti_service.parallel(LtiSystem.static([[1.0]]), c_sys, sign=-1.0)
    omega = np.array([0.1, 1.0, 10.0])
    response = lti_service.frequency_response(one_minus, omega)[:, 0, 0]
    s = 1j * omega
    assert np.allclose(response, s / (s + 1.0), atol=1e-9)


def test_runner_matches_discrete_convolution(rng):
    for _ in range(50):
        order = int(rng.integers(1, 5))
        cont = random_stable(rng, order)
        cont = LtiSystem(a=cont.a, b=cont.b, c=cont.c, d=[[float(rng.standard_normal())]])
        disc = lti_service.discretize_zoh(cont, float(rng.uniform(0.01, 0.2)))
        length = int(rng.integers(1, 51))
        u = rng.standard_normal(length)
        runner = LtiRunner(disc)
        outputs = np.array([runner.step([v])[0] for v in u])
        # output at the new sample: h(0) = D + CB, h(m) = C A^m B
        pulse = np.empty(length)
        x = disc.b[:, 0].copy()
        for m in range(length):
            pulse[m] = disc.c[0] @ x
            x = disc.a @ x
        pulse[0] += disc.d[0, 0]
        expected = np.convolve(u, pulse)[:length]
        assert np.allclose(outputs, expected, rtol=0.0, atol=1e-10)
