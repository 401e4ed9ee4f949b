import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwpf.controller import (
    Controller,
    DeltaFunction,
    Gains,
    Setpoint,
    abs_switch,
    control_u1,
    control_u2,
    extract_thrust_alpha,
    full_control,
    heading_control,
    pitch_control,
    sine_divided_difference,
    switch,
    virtual_target_rate,
)
from fwpf.dynamics import AircraftState, design_speed, drag, lift, longitudinal_rates, trim
from fwpf.errors import DomainError, SingularityError
from fwpf.lyapunov import pitch_matrix
from fwpf.path import Circle, Line, TrackingErrors, tracking_errors

from .conftest import DEG, REF_AERO, REF_GAINS

G = REF_GAINS
DELTA = DeltaFunction()


def test_u1_zero_at_rest():
    assert control_u1(0.0, 0.0, 0.0, G) == 0.0


def test_u1_speed_error():
    assert control_u1(1.0, 0.0, 0.0, G) == -50.0


def test_u2_lift_cancels_weight():
    assert control_u2(10.0, 0.0, 0.0, 1.0, G) == 0.0


def test_u2_arithmetic_anchor():
    assert control_u2(10.0, 0.1, math.pi / 2, 0.0, Gains(k_gamma=2.0)) == pytest.approx(-2.0, abs=1e-15)


def test_extract_345():
    out = extract_thrust_alpha(3.0, 4.0)
    assert out.thrust == 5.0
    assert out.alpha_d == pytest.approx(math.asin(0.8), rel=1e-15)
    assert out.alpha_d == pytest.approx(0.9273, abs=1e-4)
    assert not out.degenerate and not out.branch_clamped


def test_extract_pure_forward():
    assert extract_thrust_alpha(2.0, 0.0).alpha_d == 0.0


def test_extract_degenerate_holds_previous():
    out = extract_thrust_alpha(1e-12, -1e-12, alpha_prev=0.1)
    assert out.degenerate and out.alpha_d == 0.1


def test_extract_negative_u1_is_clamped():
    out = extract_thrust_alpha(-1.0, 0.5)
    assert out.branch_clamped
    assert out.alpha_d == pytest.approx(math.pi / 2)
    assert extract_thrust_alpha(-1.0, -0.5).alpha_d == pytest.approx(-math.pi / 2)


@given(st.floats(1e-6, 1e6), st.floats(-1e6, 1e6))
def test_extract_reconstructs_components(u1, u2):
    out = extract_thrust_alpha(u1, u2)
    assert out.thrust >= 0
    assert out.thrust * math.cos(out.alpha_d) == pytest.approx(u1, rel=1e-12, abs=1e-12 * out.thrust)
    assert out.thrust * math.sin(out.alpha_d) == pytest.approx(u2, rel=1e-12, abs=1e-12 * out.thrust)


def test_pitch_control_zero():
    assert pitch_control(0.0, 0.0, 0.0, G) == 0.0


def test_pitch_control_anchor():
    assert pitch_control(0.1, 0.0, 0.0, G) == pytest.approx(-1.0, rel=1e-15)


def test_pitch_loop_eigenvalues():
    eig = np.sort_complex(np.linalg.eigvals(pitch_matrix(G.k_theta1, G.k_theta2)))
    roots = np.sort_complex(np.roots([1.0, 5.0, 10.0]))
    assert eig == pytest.approx(roots, abs=1e-12)
    assert np.all(eig.real < 0)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_pitch_matrix_hurwitz(k1, k2):
    assert np.all(np.linalg.eigvals(pitch_matrix(k1, k2)).real < 0)


def test_virtual_target_paces_uav():
    assert virtual_target_rate(0.0, 0.0, 10.0, G) == 10.0


def test_virtual_target_catches_up():
    assert virtual_target_rate(5.0, 0.0, 10.0, G) == pytest.approx(12.0)
    assert virtual_target_rate(5.0, 0.0, 10.0, G, mode="sign") == pytest.approx(12.0)


def test_switch_modes():
    assert switch(0.05, 0.1, "sat") == pytest.approx(0.5)
    assert switch(-3.0, 0.1, "sat") == -1.0
    assert switch(-3.0, 0.0, "sat") == -1.0
    assert switch(0.0, 0.1, "sign") == 0.0
    assert switch(0.1, 0.1, "tanh") == pytest.approx(math.tanh(1.0))
    with pytest.raises(DomainError):
        switch(1.0, 0.1, "bang")


@given(st.floats(-1e3, 1e3), st.sampled_from(["sign", "sat", "tanh"]))
def test_abs_switch_nonnegative(x, mode):
    assert abs_switch(x, 0.1, mode) >= 0.0
    assert abs_switch(x, 0.1, mode) <= abs(x) + 1e-15


def test_delta_at_zero():
    assert DELTA(0.0) == 0.0


def test_delta_saturates():
    assert DELTA(1e6) == pytest.approx(-math.pi / 2.1, rel=1e-15)


def test_delta_sector_condition_grid():
    e = np.linspace(-1e3, 1e3, 100_000)
    e = np.concatenate([e, -e, np.geomspace(1e-12, 1e2, 1000)])
    d = np.array([DELTA(x) for x in e])
    assert np.all(e * d <= 0)
    assert np.all(np.abs(d) <= DELTA.psi_a)
    assert np.all(np.sign(d[e != 0]) == -np.sign(e[e != 0]))


@given(st.floats(-20.0, 20.0))
def test_delta_prime_finite_difference(e):
    h = 1e-5
    fd = (DELTA(e + h) - DELTA(e - h)) / (2 * h)
    assert DELTA.prime(e) == pytest.approx(fd, abs=1e-6)
    assert abs(DELTA.prime(e)) <= DELTA.psi_a * DELTA.k_delta


def test_delta_rejects_bad_parameters():
    with pytest.raises(DomainError):
        DeltaFunction(psi_a=math.pi / 2)
    with pytest.raises(DomainError):
        DeltaFunction(k_delta=0.0)


def test_divided_difference_limit():
    for d in (-1.2, 0.0, 0.7):
        assert sine_divided_difference(d, d) == pytest.approx(math.cos(d), rel=1e-15)
        assert sine_divided_difference(d + 1e-9, d) == pytest.approx(math.cos(d), abs=1e-9)


@given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_divided_difference_matches_naive(a, b):
    if abs(a - b) > 1e-3:
        naive = (math.sin(a) - math.sin(b)) / (a - b)
        assert sine_divided_difference(a, b) == pytest.approx(naive, abs=1e-9)


@given(st.floats(-3.0, 3.0), st.floats(-1e-5, 1e-5))
def test_divided_difference_continuous_across_fallback(a, h):
    # series branch and product branch agree near the switch-over
    assert sine_divided_difference(a + h, a) == pytest.approx(
        math.cos(a + h / 2) * (1 - h * h / 24), abs=1e-12
    )


def test_heading_control_on_equilibrium_line():
    omega, delta = heading_control(TrackingErrors(0.0, 0.0, 0.0), 10.0, 10.0, 0.0, DELTA, G)
    assert omega == 0.0 and delta == 0.0


def test_heading_control_on_circle_is_curvature_rate():
    omega, _ = heading_control(TrackingErrors(0.0, 0.0, 0.0), 10.0, 10.0, 1 / 20, DELTA, G)
    assert omega == pytest.approx(0.5)


def _normalized_cancellation(rng, n):
    """Random states; thrust applied along the commanded AoA, aero at the state AoA."""
    m, g = REF_AERO.mass, REF_AERO.gravity
    worst_v = worst_g = 0.0
    for _ in range(n):
        v = rng.uniform(1.0, 150.0)
        v_d = rng.uniform(5.0, 100.0)
        gamma, gamma_d = rng.uniform(-0.6, 0.6, 2)
        alpha = rng.uniform(-0.3, 0.3)
        D, L = drag(v, alpha, REF_AERO), lift(v, alpha, REF_AERO)
        u1 = control_u1(v - v_d, gamma, D, G, m, g)
        u2 = control_u2(v, gamma - gamma_d, gamma, L, G, m, g)
        T, a_d, *_ = extract_thrust_alpha(u1, u2)
        if u1 <= 0:
            continue
        v_dot = (T * math.cos(a_d) - D) / m - g * math.sin(gamma)
        gamma_dot = (T * math.sin(a_d) + L - m * g * math.cos(gamma)) / (m * v)
        scale_v = 1.0 + G.k_v * abs(v - v_d) + D / m + g
        scale_g = 1.0 + (abs(u2) + L + m * g) / (m * v)
        worst_v = max(worst_v, abs(v_dot + G.k_v * (v - v_d)) / scale_v)
        worst_g = max(worst_g, abs(gamma_dot + G.k_gamma * (gamma - gamma_d)) / scale_g)
    return worst_v, worst_g


def test_cancellation_random_states():
    wv, wg = _normalized_cancellation(np.random.default_rng(1), 1000)
    assert wv < 1e-10 and wg < 1e-10


def test_cancellation_on_physical_plant_at_commanded_aoa():
    """Place the aircraft at the AoA the controller commands (fixed point in
    alpha) and run the physical plant model on the resulting thrust."""
    from scipy.optimize import brentq

    rng = np.random.default_rng(2)
    m, g = REF_AERO.mass, REF_AERO.gravity
    checked = 0
    while checked < 200:
        v, v_d = rng.uniform(20.0, 120.0), rng.uniform(20.0, 100.0)
        gamma, gamma_d = rng.uniform(-0.3, 0.3, 2)

        def gap(alpha):
            u1 = control_u1(v - v_d, gamma, drag(v, alpha, REF_AERO), G, m, g)
            u2 = control_u2(v, gamma - gamma_d, gamma, lift(v, alpha, REF_AERO), G, m, g)
            return extract_thrust_alpha(u1, u2).alpha_d - alpha

        try:
            alpha = brentq(gap, -0.5, 0.5, xtol=1e-15)
        except ValueError:
            continue
        u1 = control_u1(v - v_d, gamma, drag(v, alpha, REF_AERO), G, m, g)
        if u1 <= 0:
            continue
        u2 = control_u2(v, gamma - gamma_d, gamma, lift(v, alpha, REF_AERO), G, m, g)
        T = math.hypot(u1, u2)
        v_dot, gamma_dot, *_ = longitudinal_rates(v, gamma, gamma + alpha, 0.0, T, 0.0, REF_AERO)
        assert v_dot == pytest.approx(-G.k_v * (v - v_d), abs=1e-9 * (1 + T / m))
        assert gamma_dot == pytest.approx(-G.k_gamma * (gamma - gamma_d), abs=1e-9 * (1 + T / (m * v)))
        checked += 1


def _controller(**kw):
    v_d = design_speed(REF_AERO)
    return Controller(REF_AERO, G, v_d, 1 * DEG, **kw)


def test_controller_validation():
    with pytest.raises(DomainError):
        _controller(qd_mode="exact")
    with pytest.raises(DomainError):
        _controller(switch_mode="bang")
    with pytest.raises(DomainError):
        Controller(REF_AERO, G, 0.0, 0.0)


def test_controller_singular_airspeed():
    with pytest.raises(SingularityError):
        _controller().evaluate(1e-4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0, 0.0))


@pytest.mark.parametrize("mode", ["filter", "zero", "freeze"])
def test_controller_theta_d_constraint(mode):
    c = _controller(qd_mode=mode, alpha_freeze=0.1)
    rng = np.random.default_rng(3)
    circle = Circle(radius=20.0)
    for _ in range(200):
        out = c.evaluate(rng.uniform(1, 100), *rng.uniform(-0.5, 0.5, 3), *rng.uniform(-30, 30, 2),
                         rng.uniform(-4, 4), circle.frame(rng.uniform(0, 100)), tuple(rng.uniform(-1, 1, 2)))
        assert out.theta_d == out.alpha_d + 1 * DEG
        assert out.thrust >= 0


def test_freeze_mode_projects_thrust():
    c = _controller(qd_mode="freeze", alpha_freeze=0.1)
    out = c.evaluate(30.0, 0.1, 0.2, 0.0, 0.0, 0.0, 0.0, (20.0, 0.0, math.pi / 2, 0.05))
    assert out.alpha_d == 0.1 and out.q_d == 0.0 and out.q_d_dot == 0.0
    assert out.thrust == pytest.approx(max(out.u1 * math.cos(0.1) + out.u2 * math.sin(0.1), 0.0))


def test_thrust_limit_reports_saturation():
    c = _controller(thrust_max=1.0)
    out = c.evaluate(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0, 0.0))
    assert out.saturated and out.thrust == 1.0


def test_full_control_at_trim():
    v_d = design_speed(REF_AERO)
    gamma_d = 1 * DEG
    T_trim, a_trim = trim(REF_AERO, v_d, gamma_d)
    circle = Circle(radius=20.0)
    target = circle.target(5.0)
    state = AircraftState(v_d, gamma_d, a_trim + gamma_d, 0.0, *target.position, 0.0, target.psi_f)
    errors = tracking_errors(state, target)
    sp = Setpoint.initial(v_d, gamma_d, a_trim)
    control, new_sp = full_control(state, target, errors, sp, REF_AERO, G, 1e-3)
    assert control.thrust == pytest.approx(T_trim, rel=1e-10)
    assert control.tau == pytest.approx(0.0, abs=1e-8)
    assert control.omega == pytest.approx(v_d / 20.0, rel=1e-12)
    assert new_sp.theta_d == new_sp.alpha_d + gamma_d


def test_full_control_initial_step_is_finite():
    circle = Circle(radius=20.0)
    target = circle.target(0.0)
    state = AircraftState(1.0, 8 * DEG, 8 * DEG, 0.0, 10.0, -5.0, 0.0, 0.0)
    sp = Setpoint.initial(design_speed(REF_AERO), 1 * DEG)
    control, new_sp = full_control(state, target, tracking_errors(state, target), sp, REF_AERO, G, 1e-3)
    assert all(math.isfinite(x) for x in (control.thrust, control.tau, control.omega, control.s_dot))
    assert control.thrust >= 0
    assert new_sp.theta_d == new_sp.alpha_d + new_sp.gamma_d


def test_full_control_residual_vanishes_with_errors():
    """Applying the commands drives v_dot toward -k_v v~ as the AoA error shrinks."""
    v_d = design_speed(REF_AERO)
    gamma_d = 1 * DEG
    _, a_trim = trim(REF_AERO, v_d, gamma_d)
    line = Line()
    target = line.target(0.0)
    residuals = []
    for scale in (1e-1, 1e-2, 1e-3):
        state = AircraftState(v_d + 5 * scale, gamma_d + scale, gamma_d + scale + a_trim + scale, 0.0,
                              0.0, 0.0, 0.0, 0.0)
        sp = Setpoint.initial(v_d, gamma_d, a_trim)
        control, _ = full_control(state, target, tracking_errors(state, target), sp, REF_AERO, G, 1e-3)
        v_dot, *_ = longitudinal_rates(state.v, state.gamma, state.theta, 0.0, control.thrust, 0.0, REF_AERO)
        residuals.append(abs(v_dot + G.k_v * (state.v - v_d)))
    assert residuals[0] > residuals[1] > residuals[2]
    assert residuals[2] < 1e-2 * residuals[0]


@given(st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_extract_agrees_with_arcsin_form(u1, u2):
    T = math.hypot(u1, u2)
    if abs(u2 / T) < 0.99:
        assert extract_thrust_alpha(u1, u2).alpha_d == pytest.approx(math.asin(u2 / T), abs=1e-13)
