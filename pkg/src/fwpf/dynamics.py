"""Plant model: longitudinal point-mass dynamics plus planar heading kinematics.

State ordering used by the integrator is ``STATE_FIELDS``. Angles are in
radians, the angle of attack is never stored and is always ``theta - gamma``.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, SingularityError

EPS_V = 1e-3

STATE_FIELDS = ("v", "gamma", "theta", "q", "x", "y", "z", "psi")


@dataclass(frozen=True)
class AircraftState:
    v: float
    gamma: float
    theta: float
    q: float
    x: float
    y: float
    z: float
    psi: float

    @property
    def alpha(self) -> float:
        return self.theta - self.gamma

    def as_tuple(self) -> tuple:
        return astuple(self)


@dataclass(frozen=True)
class ControlInput:
    thrust: float
    tau: float
    omega: float
    s_dot: float = 0.0


@dataclass(frozen=True)
class StateDerivative:
    v: float
    gamma: float
    theta: float
    q: float
    x: float
    y: float
    z: float
    psi: float

    def as_tuple(self) -> tuple:
        return astuple(self)


@dataclass(frozen=True)
class AeroParams:
    """Airframe constants and a linear-lift / quadratic-polar aero model.

    ``c_bar`` lumps dynamic-pressure factors (rho * S / 2), so that
    ``L = c_bar * v**2 * C_L``.
    """

    mass: float = 3.0
    inertia_y: float = 1.0
    gravity: float = 9.81
    c_bar: float = 0.005
    cl0: float = 0.0
    cl_alpha: float = 9.0
    cd0: float = 0.04
    k_induced: float = 0.045

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise DomainError(f"aero.{f.name} must be finite")
        if self.mass <= 0 or self.inertia_y <= 0 or self.c_bar <= 0:
            raise DomainError("mass, inertia_y and c_bar must be positive")
        if self.cd0 < 0 or self.k_induced < 0:
            raise DomainError("cd0 and k_induced must be non-negative")

    def lift_coefficient(self, alpha: float) -> float:
        return self.cl0 + self.cl_alpha * alpha

    def best_glide_alpha(self) -> float:
        """AoA maximising L/D for the polar (requires cl_alpha > 0, k > 0)."""
        cl_star = math.sqrt(self.cd0 / self.k_induced)
        return (cl_star - self.cl0) / self.cl_alpha


def _check_finite(*values):
    for value in values:
        if not math.isfinite(value):
            raise DomainError(f"non-finite input {value!r}")


def lift(v: float, alpha: float, aero: AeroParams) -> float:
    _check_finite(v, alpha)
    return aero.c_bar * v * v * (aero.cl0 + aero.cl_alpha * alpha)


def drag(v: float, alpha: float, aero: AeroParams) -> float:
    _check_finite(v, alpha)
    cl = aero.cl0 + aero.cl_alpha * alpha
    return aero.c_bar * v * v * (aero.cd0 + aero.k_induced * cl * cl)


def longitudinal_rates(v, gamma, theta, q, thrust, tau, aero, eps_v=EPS_V):
    """Return ``(v_dot, gamma_dot, theta_dot, q_dot, z_dot)`` on the physical plant."""
    if not v > eps_v:
        raise SingularityError(f"airspeed {v!r} at or below guard {eps_v}")
    alpha = theta - gamma
    m = aero.mass
    g = aero.gravity
    qbar = aero.c_bar * v * v
    cl = aero.cl0 + aero.cl_alpha * alpha
    lift_ = qbar * cl
    drag_ = qbar * (aero.cd0 + aero.k_induced * cl * cl)
    v_dot = (thrust * math.cos(alpha) - drag_) / m - g * math.sin(gamma)
    gamma_dot = (thrust * math.sin(alpha) + lift_ - m * g * math.cos(gamma)) / (m * v)
    return v_dot, gamma_dot, q, tau / aero.inertia_y, v * math.sin(gamma)


def longitudinal_derivatives(
    state: AircraftState, control: ControlInput, aero: AeroParams, eps_v: float = EPS_V
) -> dict:
    """Longitudinal part of the state derivative, keyed by state field."""
    v_dot, gamma_dot, theta_dot, q_dot, z_dot = longitudinal_rates(
        state.v, state.gamma, state.theta, state.q, control.thrust, control.tau, aero, eps_v
    )
    return {"v": v_dot, "gamma": gamma_dot, "theta": theta_dot, "q": q_dot, "z": z_dot}


def lateral_derivatives(state: AircraftState, control: ControlInput) -> dict:
    return {
        "x": state.v * math.cos(state.psi),
        "y": state.v * math.sin(state.psi),
        "psi": control.omega,
    }


def state_derivative(
    state: AircraftState,
    control: ControlInput,
    aero: AeroParams,
    disturbance=None,
    t: float = 0.0,
    eps_v: float = EPS_V,
) -> StateDerivative:
    """Full plant derivative; an enabled disturbance adds ``d(t)`` to the yaw rate."""
    rates = longitudinal_derivatives(state, control, aero, eps_v)
    rates.update(lateral_derivatives(state, control))
    if disturbance is not None:
        rates["psi"] += disturbance(t)
    return StateDerivative(**rates)


def trim(aero: AeroParams, v: float, gamma: float) -> tuple[float, float]:
    """Thrust and AoA that null ``v_dot`` and ``gamma_dot`` at airspeed ``v``.

    With ``fx = D + m g sin(gamma)`` and ``fz = m g cos(gamma) - L`` the thrust
    must point along ``(fx, fz)``, i.e. ``fz cos(alpha) = fx sin(alpha)``. Of the
    roots on ``|alpha| < pi/2`` with positive thrust the one closest to zero is
    returned; DomainError if there is none (e.g. a dive steeper than the glide).
    """
    w = aero.mass * aero.gravity
    sg, cg = math.sin(gamma), math.cos(gamma)

    def forces(alpha):
        return drag(v, alpha, aero) + w * sg, w * cg - lift(v, alpha, aero)

    def residual(alpha):
        fx, fz = forces(alpha)
        return fz * math.cos(alpha) - fx * math.sin(alpha)

    grid = np.linspace(-0.5 * math.pi, 0.5 * math.pi, 1441)[1:-1]
    vals = [residual(a) for a in grid]
    best = None
    for a0, a1, r0, r1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if r0 == 0.0:
            root = a0
        elif r0 * r1 < 0.0:
            root = brentq(residual, a0, a1, xtol=1e-15, maxiter=200)
        else:
            continue
        fx, fz = forces(root)
        if fx * math.cos(root) + fz * math.sin(root) > 0 and (best is None or abs(root) < abs(best)):
            best = root
    if best is None:
        raise DomainError(f"no positive-thrust trim at v={v!r}, gamma={gamma!r}")
    fx, fz = forces(best)
    return math.hypot(fx, fz), best


def design_speed(aero: AeroParams, lift_fraction: float = 0.96) -> float:
    """Cruise speed ``sqrt(m g / (lift_fraction * c_bar))``."""
    return math.sqrt(aero.mass * aero.gravity / (lift_fraction * aero.c_bar))


def tune_symmetric_polar(
    alpha_star: float, gamma_d: float, cd0: float, lift_fraction: float = 0.96
) -> tuple[float, float]:
    """Pick ``(cl_alpha, k_induced)`` for a symmetric wing so that ``alpha_star``
    is both the L/D optimum and the trim AoA at ``design_speed``.

    At ``design_speed`` the dynamic pressure times area equals
    ``m g / lift_fraction``, so the result does not depend on mass or ``c_bar``.
    At the L/D optimum ``C_D = 2 cd0``.
    """
    cl = lift_fraction * (
        math.cos(gamma_d) - math.tan(alpha_star) * (2.0 * cd0 / lift_fraction + math.sin(gamma_d))
    )
    if cl <= 0:
        raise DomainError("no positive-lift polar satisfies the trim request")
    return cl / alpha_star, cd0 / (cl * cl)
