"""Lyapunov certificate evaluation along simulated trajectories.

Functions taking an :class:`ErrorVector` accept scalar or array fields so
whole logs can be evaluated at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import LyapunovError


class ErrorVector(NamedTuple):
    """Closed-loop error coordinates ``(v~, gamma~, theta~1, theta~2, e_s, e_d, psi~)``."""

    v_err: float
    gamma_err: float
    theta1_err: float
    theta2_err: float
    e_s: float
    e_d: float
    psi_tilde: float


def pitch_matrix(k1: float, k2: float) -> np.ndarray:
    return np.array([[0.0, 1.0], [-k1, -k2]])


def solve_lyapunov_2x2(k1: float, k2: float, Q=None) -> np.ndarray:
    """Closed-form ``P`` with ``P A + A^T P = -Q`` for ``A = [[0, 1], [-k1, -k2]]``.

    Computed and returned in ``np.longdouble``: for widely spread gains the
    entries of ``P`` reach ~1e5 and binary64 rounding alone would leave an
    absolute residual above 1e-12.
    """
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
    if Q.shape != (2, 2) or not np.allclose(Q, Q.T, rtol=0, atol=0):
        raise LyapunovError("Q must be a symmetric 2x2 matrix")
    if not (Q[0, 0] > 0 and np.linalg.det(Q) > 0):
        raise LyapunovError("Q must be positive definite")
    if not (k1 > 0 and k2 > 0):
        raise LyapunovError(f"pitch gains ({k1}, {k2}) do not give a Hurwitz matrix")
    ld = np.longdouble
    k1, k2 = ld(k1), ld(k2)
    q11, q12, q22 = ld(Q[0, 0]), ld(Q[0, 1]), ld(Q[1, 1])
    p12 = q11 / (2 * k1)
    p22 = (p12 + q22 / 2) / k2
    p11 = k2 * p12 + k1 * p22 - q12
    return np.array([[p11, p12], [p12, p22]], dtype=ld)


def lyapunov_residual(P, k1, k2, Q=None) -> float:
    """``max |P A + A^T P + Q|``, evaluated in the precision of ``P``."""
    P = np.asarray(P)
    dtype = np.result_type(P.dtype, np.float64)
    Q = np.eye(2, dtype=dtype) if Q is None else np.asarray(Q, dtype=dtype)
    A = np.array([[0, 1], [-np.asarray(k1, dtype), -np.asarray(k2, dtype)]], dtype=dtype)
    return float(np.max(np.abs(P @ A + A.T @ P + Q)))


def is_positive_definite(P) -> bool:
    """Leading principal minors of a symmetric 2x2 matrix."""
    return bool(P[0, 0] > 0 and P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0] > 0)


def _quad2(M, a, b):
    return M[0, 0] * a * a + 2.0 * M[0, 1] * a * b + M[1, 1] * b * b


def _delta(delta_fn, e_d):
    return -delta_fn.psi_a * np.tanh(delta_fn.k_delta * np.asarray(e_d, dtype=float))


def _abs_smooth(x, phi, mode):
    x = np.asarray(x, dtype=float)
    if mode == "sign" or phi <= 0:
        return np.abs(x)
    if mode == "sat":
        return x * np.clip(x / phi, -1.0, 1.0)
    return x * np.tanh(x / phi)


def v1(E: ErrorVector, P) -> np.ndarray:
    return 0.5 * E.v_err**2 + 0.5 * E.gamma_err**2 + _quad2(P, E.theta1_err, E.theta2_err)


def v2(E: ErrorVector, delta_fn) -> np.ndarray:
    return 0.5 * E.e_s**2 + 0.5 * E.e_d**2 + 0.5 * (E.psi_tilde - _delta(delta_fn, E.e_d)) ** 2


def v_total(E: ErrorVector, P, delta_fn) -> np.ndarray:
    return v1(E, P) + v2(E, delta_fn)


def vdot_expected(E: ErrorVector, gains, Q, v, delta_fn, switch_mode="sign") -> np.ndarray:
    """Closed-form derivative of ``V`` under the ideal control law.

    ``v`` is the airspeed ``v~ + v_d``. With ``switch_mode`` other than
    ``"sign"`` the absolute values become ``x * switch(x)`` using the gains'
    boundary layers, matching the smoothed controller.
    """
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
    delta = _delta(delta_fn, E.e_d)
    return (
        -gains.k_v * E.v_err**2
        - gains.k_gamma * E.gamma_err**2
        - _quad2(Q, E.theta1_err, E.theta2_err)
        - gains.k_s * _abs_smooth(E.e_s, gains.phi_s, switch_mode)
        + v * E.e_d * np.sin(delta)
        - gains.k_omega * _abs_smooth(E.psi_tilde - delta, gains.phi_omega, switch_mode)
    )


@dataclass
class LyapunovReport:
    P: np.ndarray
    Q: np.ndarray
    v_d: float
    dt: float
    t: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V: np.ndarray
    V_dot_numeric: np.ndarray
    V_dot_expected: np.ndarray
    level_l: float = field(init=False)
    condition_ok: bool = field(init=False)

    def __post_init__(self):
        self.level_l = float(np.max(self.V)) if len(self.V) else math.nan
        self.condition_ok = bool(len(self.V)) and self.v_d > math.sqrt(2.0 * self.level_l)

    @property
    def band(self) -> float:
        """Tolerance ``10 dt max|V_dot|`` for numerically measured increases."""
        if not len(self.V_dot_numeric):
            return 0.0
        return 10.0 * self.dt * float(np.max(np.abs(self.V_dot_numeric)))


def numeric_derivative(values, dt: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return np.zeros_like(values)
    return np.gradient(values, dt, edge_order=2 if values.size > 2 else 1)


def build_report(E: ErrorVector, v, gains, delta_fn, v_d, dt, t, Q=None, switch_mode="sign"):
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
    P = solve_lyapunov_2x2(gains.k_theta1, gains.k_theta2, Q)
    V1 = np.asarray(v1(E, P.astype(float)), dtype=float)
    V2 = np.asarray(v2(E, delta_fn), dtype=float)
    V = V1 + V2
    return LyapunovReport(
        P=P,
        Q=Q,
        v_d=v_d,
        dt=dt,
        t=np.asarray(t, dtype=float),
        V1=V1,
        V2=V2,
        V=V,
        V_dot_numeric=numeric_derivative(V, dt),
        V_dot_expected=np.asarray(vdot_expected(E, gains, Q, v, delta_fn, switch_mode), dtype=float),
    )


class GasCheck(NamedTuple):
    condition_ok: bool
    nonincreasing_ok: bool
    level_l: float
    sqrt_2l: float
    v_d: float
    max_increase: float
    band: float

    @property
    def passed(self) -> bool:
        return self.condition_ok and self.nonincreasing_ok


def check_gas_condition(report: LyapunovReport) -> GasCheck:
    """Sufficient condition ``v_d > sqrt(2 l)`` with ``l = max V`` and the
    observed monotonicity of ``V`` up to the report's tolerance band."""
    if not len(report.V):
        raise LyapunovError("empty trajectory")
    level = report.level_l
    max_increase = float(np.max(report.V_dot_numeric))
    band = report.band
    return GasCheck(
        condition_ok=report.condition_ok,
        nonincreasing_ok=max_increase <= band,
        level_l=level,
        sqrt_2l=math.sqrt(2.0 * level),
        v_d=report.v_d,
        max_increase=max_increase,
        band=band,
    )


class DecreaseStats(NamedTuple):
    steps_checked: int
    fraction_nonincreasing: float
    max_violation: float
    band: float
    correlation: float


def assess_decrease(report: LyapunovReport, outside_mask=None) -> DecreaseStats:
    """Monotonicity of ``V`` on the selected steps, and agreement of the
    measured derivative with the closed-form one (Pearson correlation)."""
    mask = np.ones(len(report.V), bool) if outside_mask is None else np.asarray(outside_mask, bool)
    vdot = report.V_dot_numeric[mask]
    n = int(vdot.size)
    frac = float(np.mean(vdot <= 0.0)) if n else 1.0
    worst = float(np.max(vdot)) if n else 0.0
    corr = float(np.corrcoef(report.V_dot_numeric, report.V_dot_expected)[0, 1])
    return DecreaseStats(n, frac, max(worst, 0.0), report.band, corr)
