"""Combined airspeed / flight-path / pitch / path-following control law.

Force and moment terms are derived on the unit-mass plant; the ``mass``,
``gravity`` and ``inertia_y`` arguments rescale them so the same
cancellation holds on the physical plant (all default to 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .dynamics import EPS_V, AeroParams, AircraftState, ControlInput, drag, lift
from .errors import DomainError, SingularityError
from .path import TrackingErrors, VirtualTarget, frenet_errors

SWITCH_MODES = ("sign", "sat", "tanh")
QD_MODES = ("filter", "zero", "freeze")


@dataclass(frozen=True)
class Gains:
    k_v: float = 50.0
    k_gamma: float = 2.0
    k_theta1: float = 10.0
    k_theta2: float = 5.0
    k_s: float = 2.0
    k_omega: float = 20.25
    phi_s: float = 0.1
    phi_omega: float = 0.01

    def __post_init__(self):
        for name in ("k_v", "k_gamma", "k_theta1", "k_theta2", "k_s", "k_omega"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"gain {name} must be positive, got {value!r}")
        if self.phi_s < 0 or self.phi_omega < 0:
            raise DomainError("boundary layers must be non-negative")


@dataclass(frozen=True)
class Setpoint:
    v_d: float
    gamma_d: float
    alpha_d: float = 0.0
    theta_d: float = 0.0
    q_d: float = 0.0
    q_d_dot: float = 0.0

    def __post_init__(self):
        if not self.v_d > 0:
            raise DomainError("v_d must be positive")

    @classmethod
    def initial(cls, v_d, gamma_d, alpha_d=0.0):
        return cls(v_d, gamma_d, alpha_d, alpha_d + gamma_d, 0.0, 0.0)


@dataclass(frozen=True)
class DeltaFunction:
    """Saturated approach angle ``delta(e_d) = -psi_a * tanh(k_delta * e_d)``."""

    psi_a: float = math.pi / 2.1
    k_delta: float = 1.0

    def __post_init__(self):
        if not 0 < self.psi_a < math.pi / 2:
            raise DomainError("psi_a must lie in (0, pi/2)")
        if not self.k_delta > 0:
            raise DomainError("k_delta must be positive")

    def __call__(self, e_d: float) -> float:
        return -self.psi_a * math.tanh(self.k_delta * e_d)

    def prime(self, e_d: float) -> float:
        th = math.tanh(self.k_delta * e_d)
        return -self.psi_a * self.k_delta * (1.0 - th * th)


def switch(x: float, phi: float = 0.0, mode: str = "sat") -> float:
    """Replacement for ``sign(x)``: exact sign, linear boundary layer, or tanh."""
    if mode == "sign" or phi <= 0.0:
        return math.copysign(1.0, x) if x != 0.0 else 0.0
    if mode == "sat":
        r = x / phi
        return 1.0 if r > 1.0 else (-1.0 if r < -1.0 else r)
    if mode == "tanh":
        return math.tanh(x / phi)
    raise DomainError(f"unknown switch mode {mode!r}")


def abs_switch(x: float, phi: float = 0.0, mode: str = "sat") -> float:
    """``x * switch(x)``, the smoothed counterpart of ``|x|``."""
    return x * switch(x, phi, mode)


def control_u1(v_err, gamma, drag_force, gains: Gains, mass=1.0, gravity=1.0):
    """Along-velocity thrust component that imposes ``v_dot = -k_v * v_err``."""
    return drag_force + mass * (gravity * math.sin(gamma) - gains.k_v * v_err)


def control_u2(v, gamma_err, gamma, lift_force, gains: Gains, mass=1.0, gravity=1.0):
    """Normal thrust component that imposes ``gamma_dot = -k_gamma * gamma_err``."""
    return -lift_force + mass * (gravity * math.cos(gamma) - v * gains.k_gamma * gamma_err)


class ThrustExtraction(NamedTuple):
    thrust: float
    alpha_d: float
    degenerate: bool
    branch_clamped: bool


def extract_thrust_alpha(u1, u2, alpha_prev=0.0, eps_t=1e-9) -> ThrustExtraction:
    """Thrust magnitude and commanded AoA from the two force components.

    Forward flight assumes ``u1 > 0``; for ``u1 < 0`` the AoA is pinned to the
    branch edge ``+-pi/2`` (continuous with the ``u1 -> 0+`` limit) and flagged.
    Below ``eps_t`` the direction is undefined and ``alpha_prev`` is held.
    """
    thrust = math.hypot(u1, u2)
    if thrust < eps_t:
        return ThrustExtraction(thrust, alpha_prev, True, False)
    if u1 < 0.0:
        return ThrustExtraction(thrust, math.copysign(0.5 * math.pi, u2), False, True)
    # equals arcsin(u2 / T) on this branch, without its loss of accuracy near +-1
    return ThrustExtraction(thrust, math.atan2(u2, u1), False, False)


def pitch_control(theta1_err, theta2_err, q_d_dot, gains: Gains, inertia_y=1.0):
    return inertia_y * (-gains.k_theta1 * theta1_err - gains.k_theta2 * theta2_err + q_d_dot)


def virtual_target_rate(e_s, psi_tilde, v, gains: Gains, mode="sat"):
    return gains.k_s * switch(e_s, gains.phi_s, mode) + v * math.cos(psi_tilde)


def sine_divided_difference(a: float, b: float) -> float:
    """``(sin a - sin b) / (a - b)``, finite at ``a == b`` where it equals ``cos a``."""
    h = 0.5 * (a - b)
    if abs(h) < 5e-7:
        sinc = 1.0 - h * h / 6.0
    else:
        sinc = math.sin(h) / h
    return math.cos(0.5 * (a + b)) * sinc


def heading_control(
    errors: TrackingErrors, v, s_dot, curvature, delta_fn: DeltaFunction, gains: Gains, mode="sat"
):
    """Yaw-rate command; returns ``(omega, delta)``."""
    e_s, e_d, psi_tilde = errors.e_s, errors.e_d, errors.psi_tilde
    delta = delta_fn(e_d)
    e_d_dot = v * math.sin(psi_tilde) - curvature * e_s * s_dot
    omega = (
        curvature * s_dot
        + delta_fn.prime(e_d) * e_d_dot
        - v * e_d * sine_divided_difference(psi_tilde, delta)
        - gains.k_omega * switch(psi_tilde - delta, gains.phi_omega, mode)
    )
    return omega, delta


class ControlOutput(NamedTuple):
    thrust: float
    tau: float
    omega: float
    s_dot: float
    alpha_d: float
    theta_d: float
    q_d: float
    q_d_dot: float
    filter_rates: tuple
    u1: float
    u2: float
    e_s: float
    e_d: float
    psi_tilde: float
    delta: float
    v_err: float
    gamma_err: float
    theta1_err: float
    theta2_err: float
    degenerate: bool
    branch_clamped: bool
    saturated: bool


class Controller:
    """Continuous-time control law for one vehicle.

    The pitch reference derivatives ``q_d`` and ``q_d_dot`` come from one of:

    ``filter``  two cascaded first-order filters on ``theta_d`` whose states
                are integrated with the plant (``filter_rates`` are their
                derivatives),
    ``zero``    ``q_d = q_d_dot = 0`` with ``theta_d`` tracking ``alpha_d + gamma_d``,
    ``freeze``  ``theta_d`` held at ``alpha_freeze + gamma_d`` and zero rates.
    """

    def __init__(
        self,
        aero: AeroParams,
        gains: Gains,
        v_d: float,
        gamma_d: float,
        delta_fn: DeltaFunction | None = None,
        qd_mode: str = "filter",
        filter_tau: float = 5e-3,
        alpha_freeze: float = 0.0,
        switch_mode: str = "sat",
        thrust_max: float | None = None,
        eps_t: float = 1e-9,
        eps_v: float = EPS_V,
    ):
        if qd_mode not in QD_MODES:
            raise DomainError(f"unknown q_d mode {qd_mode!r}")
        if switch_mode not in SWITCH_MODES:
            raise DomainError(f"unknown switch mode {switch_mode!r}")
        if not v_d > 0:
            raise DomainError("v_d must be positive")
        if not filter_tau > 0:
            raise DomainError("filter_tau must be positive")
        self.aero = aero
        self.gains = gains
        self.v_d = v_d
        self.gamma_d = gamma_d
        self.delta_fn = delta_fn or DeltaFunction()
        self.qd_mode = qd_mode
        self.filter_tau = filter_tau
        self.alpha_freeze = alpha_freeze
        self.switch_mode = switch_mode
        self.thrust_max = thrust_max
        self.eps_t = eps_t
        self.eps_v = eps_v
        self.alpha_hold = alpha_freeze

    def evaluate(self, v, gamma, theta, q, x, y, psi, frame, filt=(0.0, 0.0)) -> ControlOutput:
        """Commands at one state. ``frame`` is ``(px, py, psi_f, curvature)``."""
        aero = self.aero
        gains = self.gains
        mode = self.switch_mode
        m = aero.mass
        g = aero.gravity
        if not v > self.eps_v:
            raise SingularityError(f"airspeed {v!r} at or below guard {self.eps_v}")

        alpha = theta - gamma
        v_err = v - self.v_d
        gamma_err = gamma - self.gamma_d
        u1 = control_u1(v_err, gamma, drag(v, alpha, aero), gains, m, g)
        u2 = control_u2(v, gamma_err, gamma, lift(v, alpha, aero), gains, m, g)
        thrust, alpha_d, degenerate, clamped = extract_thrust_alpha(
            u1, u2, self.alpha_hold, self.eps_t
        )
        if self.qd_mode == "freeze":
            # fixed thrust direction: best nonnegative thrust along it
            alpha_d = self.alpha_freeze
            thrust = max(u1 * math.cos(alpha_d) + u2 * math.sin(alpha_d), 0.0)
        saturated = False
        if self.thrust_max is not None and thrust > self.thrust_max:
            thrust = self.thrust_max
            saturated = True

        theta_d = alpha_d + self.gamma_d
        if self.qd_mode == "filter":
            tau_f = self.filter_tau
            q_d = (theta_d - filt[0]) / tau_f
            q_d_dot = (q_d - filt[1]) / tau_f
            filter_rates = (q_d, q_d_dot)
        else:
            q_d = q_d_dot = 0.0
            filter_rates = (0.0, 0.0)
        theta1_err = theta - theta_d
        theta2_err = q - q_d
        tau = pitch_control(theta1_err, theta2_err, q_d_dot, gains, aero.inertia_y)

        px, py, psi_f, curvature = frame
        e_s, e_d, psi_tilde = frenet_errors(x, y, psi, px, py, psi_f)
        s_dot = virtual_target_rate(e_s, psi_tilde, v, gains, mode)
        omega, delta = heading_control(
            TrackingErrors(e_s, e_d, psi_tilde), v, s_dot, curvature, self.delta_fn, gains, mode
        )
        return ControlOutput(
            thrust, tau, omega, s_dot, alpha_d, theta_d, q_d, q_d_dot, filter_rates, u1, u2,
            e_s, e_d, psi_tilde, delta, v_err, gamma_err, theta1_err, theta2_err,
            degenerate, clamped, saturated,
        )


def full_control(
    state: AircraftState,
    target: VirtualTarget,
    errors: TrackingErrors,
    setpoint: Setpoint,
    aero: AeroParams,
    gains: Gains,
    dt: float,
    delta_fn: DeltaFunction | None = None,
    filter_tau: float | None = None,
    switch_mode: str = "sat",
    eps_t: float = 1e-9,
) -> tuple[ControlInput, Setpoint]:
    """One sampled-data controller update.

    ``q_d`` and ``q_d_dot`` are low-pass filtered finite differences of the
    ``theta_d`` sequence carried in ``setpoint`` (filter time constant
    ``filter_tau``, default ``5 * dt``). The returned ``ControlInput`` also
    carries the virtual-target rate in ``s_dot``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    delta_fn = delta_fn or DeltaFunction()
    tau_f = 5.0 * dt if filter_tau is None else filter_tau
    m, g = aero.mass, aero.gravity

    alpha = state.alpha
    v_err = state.v - setpoint.v_d
    gamma_err = state.gamma - setpoint.gamma_d
    u1 = control_u1(v_err, state.gamma, drag(state.v, alpha, aero), gains, m, g)
    u2 = control_u2(state.v, gamma_err, state.gamma, lift(state.v, alpha, aero), gains, m, g)
    thrust, alpha_d, _, _ = extract_thrust_alpha(u1, u2, setpoint.alpha_d, eps_t)
    theta_d = alpha_d + setpoint.gamma_d

    a = dt / (tau_f + dt)
    q_d = setpoint.q_d + a * ((theta_d - setpoint.theta_d) / dt - setpoint.q_d)
    q_d_dot = setpoint.q_d_dot + a * ((q_d - setpoint.q_d) / dt - setpoint.q_d_dot)
    tau = pitch_control(state.theta - theta_d, state.q - q_d, q_d_dot, gains, aero.inertia_y)

    s_dot = virtual_target_rate(errors.e_s, errors.psi_tilde, state.v, gains, switch_mode)
    omega, _ = heading_control(errors, state.v, s_dot, target.curvature, delta_fn, gains, switch_mode)
    new_setpoint = replace(setpoint, alpha_d=alpha_d, theta_d=theta_d, q_d=q_d, q_d_dot=q_d_dot)
    return ControlInput(thrust, tau, omega, s_dot), new_setpoint
