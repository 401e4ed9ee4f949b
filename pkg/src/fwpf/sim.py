"""Fixed-step closed-loop simulation, trajectory log and CSV I/O."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from . import _kernel as K
from .config import ScenarioConfig
from .controller import Controller
from .dynamics import longitudinal_rates, trim
from .errors import FwpfError, IntegrationFault, PathDomainError, SingularityError
from .lyapunov import ErrorVector, LyapunovReport, build_report
from .path import Circle, Line, SampledPath

AUG_FIELDS = ("v", "gamma", "theta", "q", "x", "y", "z", "psi", "s", "theta_filt", "q_filt")

CSV_COLUMNS = (
    "t", "v", "gamma", "theta", "q", "alpha", "x", "y", "z", "psi", "s",
    "e_s", "e_d", "psi_tilde", "v_err", "gamma_err", "theta1_err", "theta2_err",
    "T", "tau", "omega", "V1", "V2", "V",
)
EXTRA_COLUMNS = ("alpha_d", "theta_d", "q_d", "q_d_dot", "s_dot", "u1", "u2", "delta", "disturbance")
_RAW_COLUMNS = tuple(c for c in CSV_COLUMNS if c not in ("V1", "V2", "V")) + EXTRA_COLUMNS


def rk4_step(f, y, t, dt, k1=None):
    """One classical Runge-Kutta step of ``y' = f(t, y)``.

    Raises IntegrationFault naming the first non-finite component.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if k1 is None:
        k1 = f(t, y)
    half = 0.5 * dt
    k2 = f(t + half, y + half * k1)
    k3 = f(t + half, y + half * k2)
    k4 = f(t + dt, y + dt * k3)
    y_next = y + (dt / 6.0) * (k1 + k4 + 2.0 * (k2 + k3))
    # a single sum is NaN/inf iff some component is
    if not math.isfinite(y_next.sum()):
        for stage, k in enumerate((k1, k2, k3, k4), start=1):
            bad = np.flatnonzero(~np.isfinite(k))
            if bad.size:
                raise IntegrationFault(
                    f"non-finite derivative in RK4 stage {stage} at t={t:.6g}",
                    component=int(bad[0]), t=t,
                )
        bad = np.flatnonzero(~np.isfinite(y_next))
        raise IntegrationFault(f"non-finite state at t={t + dt:.6g}", component=int(bad[0]), t=t + dt)
    return y_next


class TrajectoryLog:
    """Uniformly sampled rows, addressable by column name (``log["v"]``)."""

    def __init__(self, columns, data):
        self.columns = tuple(columns)
        self.data = np.asarray(data, dtype=float).reshape(-1, len(self.columns))
        self._index = {name: i for i, name in enumerate(self.columns)}

    def __len__(self):
        return self.data.shape[0]

    def __getitem__(self, name) -> np.ndarray:
        return self.data[:, self._index[name]]

    def __contains__(self, name):
        return name in self._index

    def error_vector(self) -> ErrorVector:
        return ErrorVector(*(self[c] for c in ErrorVector._fields))

    def tail(self, fraction: float) -> "TrajectoryLog":
        """Rows in the last ``fraction`` of the time span."""
        t = self["t"]
        if not len(t):
            return self
        cut = t[-1] - fraction * (t[-1] - t[0])
        return TrajectoryLog(self.columns, self.data[t >= cut - 1e-12])


class ClosedLoop:
    """Plant, controller and virtual target as one ODE on ``AUG_FIELDS``."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.aero = config.aero
        self.path = config.path
        self.eps_v = config.eps_v
        self.disturbance = config.disturbance if config.disturbance.enabled else None
        _, alpha_trim = trim(config.aero, config.v_d, config.gamma_d)
        self.alpha_trim = alpha_trim
        self.controller = Controller(
            config.aero,
            config.gains,
            config.v_d,
            config.gamma_d,
            delta_fn=config.delta,
            qd_mode=config.qd_mode,
            filter_tau=config.filter_tau,
            alpha_freeze=alpha_trim,
            switch_mode=config.switch_mode,
            thrust_max=config.thrust_max,
            eps_t=config.eps_t,
            eps_v=config.eps_v,
        )
        self.events = {"thrust_degenerate": 0, "alpha_branch_clamped": 0, "thrust_saturated": 0}

    def initial_vector(self) -> np.ndarray:
        st = self.config.initial
        s0 = self.config.s0
        out = self.controller.evaluate(
            st.v, st.gamma, st.theta, st.q, st.x, st.y, st.psi, self.path.frame(s0),
        )
        self.controller.alpha_hold = out.alpha_d
        return np.array([st.v, st.gamma, st.theta, st.q, st.x, st.y, st.z, st.psi, s0, out.theta_d, 0.0])

    def evaluate(self, t, y):
        if not math.isfinite(y.sum()):
            bad = int(np.flatnonzero(~np.isfinite(y))[0])
            raise IntegrationFault(f"non-finite stage state at t={t:.6g}", component=bad, t=t)
        v, gamma, theta, q, x, y_, z, psi, s, f1, f2 = y.tolist()
        out = self.controller.evaluate(v, gamma, theta, q, x, y_, psi, self.path.frame(s), (f1, f2))
        v_dot, gamma_dot, theta_dot, q_dot, z_dot = longitudinal_rates(
            v, gamma, theta, q, out.thrust, out.tau, self.aero, self.eps_v
        )
        d = self.disturbance(t) if self.disturbance is not None else 0.0
        deriv = np.array((
            v_dot, gamma_dot, theta_dot, q_dot, v * math.cos(psi), v * math.sin(psi), z_dot,
            out.omega + d, out.s_dot, out.filter_rates[0], out.filter_rates[1],
        ))
        return deriv, out, d

    def __call__(self, t, y):
        return self.evaluate(t, y)[0]

    def kernel_args(self) -> tuple:
        """``(params, s_tab, x_tab, y_tab, psi_tab, kappa_tab)`` for the compiled loop."""
        cfg = self.config
        a, g, dl = cfg.aero, cfg.gains, cfg.delta
        p = np.zeros(K.N_PARAMS)
        p[K.P_MASS:K.P_K + 1] = (a.mass, a.inertia_y, a.gravity, a.c_bar, a.cl0, a.cl_alpha, a.cd0, a.k_induced)
        p[K.P_KV:K.P_PHIW + 1] = (g.k_v, g.k_gamma, g.k_theta1, g.k_theta2, g.k_s, g.k_omega, g.phi_s, g.phi_omega)
        p[K.P_PSIA] = dl.psi_a
        p[K.P_KDELTA] = dl.k_delta
        p[K.P_VD] = cfg.v_d
        p[K.P_GAMMAD] = cfg.gamma_d
        p[K.P_ALPHA_FREEZE] = self.alpha_trim
        p[K.P_QDMODE] = {"filter": K.QD_FILTER, "zero": K.QD_ZERO, "freeze": K.QD_FREEZE}[cfg.qd_mode]
        p[K.P_FTAU] = self.controller.filter_tau
        p[K.P_SWMODE] = {"sign": K.SW_SIGN, "sat": K.SW_SAT, "tanh": K.SW_TANH}[cfg.switch_mode]
        p[K.P_TMAX] = math.inf if cfg.thrust_max is None else cfg.thrust_max
        p[K.P_EPST] = cfg.eps_t
        p[K.P_EPSV] = cfg.eps_v
        empty = np.zeros(1)
        tables = (empty,) * 5
        path = self.path
        if isinstance(path, Circle):
            p[K.P_PATH] = K.PATH_CIRCLE
            p[K.P_PX], p[K.P_PY] = path.center
            p[K.P_RADIUS] = path.radius
            p[K.P_DIR] = 1.0 if path.direction == "ccw" else -1.0
            p[K.P_PHASE] = path.phase
        elif isinstance(path, Line):
            p[K.P_PATH] = K.PATH_LINE
            p[K.P_PX], p[K.P_PY] = path.point0
            p[K.P_PHASE] = path.psi
        elif isinstance(path, SampledPath):
            p[K.P_PATH] = K.PATH_SAMPLED
            tables = (path.s_table, path.x_table, path.y_table, path.psi_table, path.kappa_table)
        else:
            raise TypeError(f"unsupported path type {type(path).__name__}")
        dist = cfg.disturbance
        p[K.P_DIST] = 1.0 if dist.enabled else 0.0
        p[K.P_AMP] = dist.amplitude
        p[K.P_FREQ] = dist.frequency
        return (p,) + tuple(np.ascontiguousarray(t, dtype=float) for t in tables)

    def record(self, t, y, out, d):
        v, gamma, theta, q, x, y_, z, psi, s = y.tolist()[:9]
        self.controller.alpha_hold = out.alpha_d
        self.events["thrust_degenerate"] += out.degenerate
        self.events["alpha_branch_clamped"] += out.branch_clamped
        self.events["thrust_saturated"] += out.saturated
        return (
            t, v, gamma, theta, q, theta - gamma, x, y_, z, psi, s,
            out.e_s, out.e_d, out.psi_tilde, out.v_err, out.gamma_err, out.theta1_err,
            out.theta2_err, out.thrust, out.tau, out.omega,
            out.alpha_d, out.theta_d, out.q_d, out.q_d_dot, out.s_dot, out.u1, out.u2, out.delta, d,
        )


class SimulationAborted(IntegrationFault):
    """Numerical fault during a run; ``partial`` holds the rows logged so far."""

    def __init__(self, cause: Exception, partial: TrajectoryLog, t: float):
        component = getattr(cause, "component", None)
        if isinstance(component, int):
            component = AUG_FIELDS[component]
        super().__init__(f"{type(cause).__name__}: {cause}", component=component, t=t)
        self.cause = cause
        self.partial = partial


def _finish_log(config: ScenarioConfig, raw: np.ndarray) -> tuple[TrajectoryLog, LyapunovReport]:
    log = TrajectoryLog(_RAW_COLUMNS, raw)
    report = lyapunov_report(log, config)
    k = len(CSV_COLUMNS) - 3
    data = np.column_stack([raw[:, :k], report.V1, report.V2, report.V, raw[:, k:]])
    columns = CSV_COLUMNS + EXTRA_COLUMNS
    return TrajectoryLog(columns, data), report


def lyapunov_report(log: TrajectoryLog, config: ScenarioConfig) -> LyapunovReport:
    return build_report(
        log.error_vector(),
        log["v"],
        config.gains,
        config.delta,
        config.v_d,
        config.dt,
        log["t"],
        Q=np.array(config.Q),
        switch_mode=config.switch_mode,
    )


_FAULTS = {
    K.FAULT_SINGULAR: (SingularityError, "airspeed at or below guard"),
    K.FAULT_NONFINITE: (IntegrationFault, "non-finite state"),
    K.FAULT_PATH: (PathDomainError, "virtual target left the sampled path"),
}


def _partial(config: ScenarioConfig, rows: np.ndarray) -> TrajectoryLog:
    if not len(rows):
        return TrajectoryLog(CSV_COLUMNS + EXTRA_COLUMNS, [])
    with np.errstate(all="ignore"):
        return _finish_log(config, rows)[0]


def run_scenario(config: ScenarioConfig) -> tuple[TrajectoryLog, LyapunovReport]:
    """Integrate the closed loop from 0 to ``t_end`` with RK4, logging every step.

    On a fault raises SimulationAborted carrying the rows logged before it.
    """
    loop = ClosedLoop(config)
    y0 = loop.initial_vector()
    params, *tables = loop.kernel_args()
    rows, done, status, component, step, events = K.integrate(
        y0, config.n_steps, config.dt, params, loop.controller.alpha_hold, *tables
    )
    rows = rows[:done]
    if status != K.OK:
        kind, text = _FAULTS[status]
        t = step * config.dt
        if kind is IntegrationFault:
            cause = IntegrationFault(f"{text} at t={t:.6g}", component=int(component), t=t)
        else:
            cause = kind(f"{text} at t={t:.6g}")
        raise SimulationAborted(cause, _partial(config, rows), t)
    log, report = _finish_log(config, rows)
    log.events = {
        "thrust_degenerate": int(events[0]),
        "alpha_branch_clamped": int(events[1]),
        "thrust_saturated": int(events[2]),
    }
    return log, report


def run_reference(config: ScenarioConfig) -> tuple[TrajectoryLog, LyapunovReport]:
    """Pure-Python twin of :func:`run_scenario`, slow but easy to inspect."""
    loop = ClosedLoop(config)
    dt = config.dt
    n = config.n_steps
    rows = np.empty((n + 1, len(_RAW_COLUMNS)))
    done = 0
    t = 0.0
    try:
        y = loop.initial_vector()
        for i in range(n + 1):
            t = i * dt
            k1, out, d = loop.evaluate(t, y)
            rows[i] = loop.record(t, y, out, d)
            done = i + 1
            if i == n:
                break
            y = rk4_step(loop, y, t, dt, k1)
    except (FwpfError, ArithmeticError) as exc:
        raise SimulationAborted(exc, _partial(config, rows[:done]), t) from exc
    log, report = _finish_log(config, rows)
    log.events = dict(loop.events)
    return log, report


def _fmt(value: float) -> str:
    return format(value, ".9g")


def write_log(log: TrajectoryLog, path, columns=CSV_COLUMNS) -> None:
    """CSV with a header row and 9 significant digits per value (overwrites)."""
    path = Path(path)
    idx = [log.columns.index(c) for c in columns]
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            block = log.data[:, idx]
            fh.writelines(",".join(map(_fmt, row)) + "\n" for row in block.tolist())
    except OSError as exc:
        raise OSError(f"cannot write trajectory log to {path}: {exc}") from exc


def read_log(path) -> TrajectoryLog:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    return TrajectoryLog(header, rows)
