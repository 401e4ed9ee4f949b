"""Scenario configuration: TOML files with a fixed, flat ``section.key`` schema.

Every value is SI (metres, seconds, radians). Unknown sections or keys are
rejected. ``setpoint.v_d`` may be omitted, in which case the cruise speed
``sqrt(m g / (setpoint.lift_fraction * c_bar))`` is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .controller import QD_MODES, SWITCH_MODES, DeltaFunction, Gains
from .dynamics import AeroParams, AircraftState, design_speed, trim
from .errors import ConfigError, FwpfError
from .path import Circle, Line, PathDefinition, SampledPath

_REQUIRED = object()

# section -> key -> (type, default); None default means "optional, unset"
SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "aero": {
        "mass": (float, 3.0),
        "inertia_y": (float, 1.0),
        "gravity": (float, 9.81),
        "c_bar": (float, _REQUIRED),
        "cl0": (float, 0.0),
        "cl_alpha": (float, _REQUIRED),
        "cd0": (float, _REQUIRED),
        "k_induced": (float, _REQUIRED),
    },
    "gains": {
        "k_v": (float, 50.0),
        "k_gamma": (float, 2.0),
        "k_theta1": (float, 10.0),
        "k_theta2": (float, 5.0),
        "k_s": (float, 2.0),
        "k_omega": (float, 20.25),
        "phi_s": (float, 0.1),
        "phi_omega": (float, 0.01),
    },
    "delta": {
        "psi_a": (float, math.pi / 2.1),
        "k_delta": (float, 1.0),
    },
    "setpoint": {
        "v_d": (float, None),
        "lift_fraction": (float, 0.96),
        "gamma_d": (float, _REQUIRED),
    },
    "path": {
        "kind": (str, "circle"),
        "center_x": (float, 0.0),
        "center_y": (float, 0.0),
        "radius": (float, 20.0),
        "direction": (str, "ccw"),
        "phase": (float, 0.0),
        "point_x": (float, 0.0),
        "point_y": (float, 0.0),
        "heading": (float, 0.0),
        "file": (str, None),
        "max_turn": (float, 0.5),
    },
    "initial": {
        "at_trim": (bool, False),
        "v": (float, 1.0),
        "gamma": (float, 0.0),
        "theta": (float, 0.0),
        "q": (float, 0.0),
        "x": (float, 0.0),
        "y": (float, 0.0),
        "z": (float, 0.0),
        "psi": (float, 0.0),
        "s": (float, 0.0),
    },
    "sim": {
        "dt": (float, 1e-3),
        "t_end": (float, 60.0),
        "eps_v": (float, 1e-3),
        "eps_t": (float, 1e-9),
        "thrust_max": (float, None),
        "switch_mode": (str, "sat"),
        "qd_mode": (str, "filter"),
        "filter_tau": (float, None),
        "lyapunov_q11": (float, 1.0),
        "lyapunov_q12": (float, 0.0),
        "lyapunov_q22": (float, 1.0),
    },
    "disturbance": {
        "kind": (str, "none"),
        "amplitude": (float, 20.0),
        "frequency": (float, 0.5),
    },
    "output": {
        "csv": (str, "trajectory.csv"),
    },
}

BUNDLED = ("paper_nominal", "paper_disturbed", "trim_start")


@dataclass(frozen=True)
class DisturbanceSignal:
    """Additive yaw-rate disturbance ``amplitude * sin(frequency * t)``."""

    kind: str = "none"
    amplitude: float = 0.0
    frequency: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "sinusoid"):
            raise ConfigError(f"disturbance.kind must be 'none' or 'sinusoid', got {self.kind!r}")
        if self.kind == "sinusoid" and not (self.amplitude >= 0 and self.frequency > 0):
            raise ConfigError("sinusoid needs amplitude >= 0 and frequency > 0")

    @property
    def enabled(self) -> bool:
        return self.kind == "sinusoid"

    def __call__(self, t: float) -> float:
        if self.kind == "none":
            return 0.0
        return self.amplitude * math.sin(self.frequency * t)


@dataclass
class ScenarioConfig:
    aero: AeroParams
    gains: Gains
    delta: DeltaFunction
    path: PathDefinition
    v_d: float
    gamma_d: float
    initial: AircraftState
    s0: float
    dt: float
    t_end: float
    disturbance: DisturbanceSignal
    qd_mode: str
    filter_tau: float
    switch_mode: str
    eps_v: float
    eps_t: float
    thrust_max: float | None
    Q: tuple
    output_csv: str
    values: dict = field(repr=False, default_factory=dict)
    source: str | None = None

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        values = dict(self.values)
        values.update(normalize_overrides(overrides))
        return build_config(values, base_dir=_base_dir(self.source), source=self.source)


def _base_dir(source):
    return Path(source).parent if source else Path.cwd()


def flatten(doc: dict) -> dict:
    flat = {}
    for section, body in doc.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            flat[f"{section}.{key}"] = value
    return flat


def _coerce(dotted, value):
    section, key = dotted.split(".", 1)
    kind, _ = SCHEMA[section][key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{dotted} must be a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{dotted} must be finite")
        return value
    if not isinstance(value, kind):
        raise ConfigError(f"{dotted} must be {kind.__name__}, got {value!r}")
    return value


def parse_value(text: str):
    """Parse an override value with TOML scalar syntax; bare words become strings."""
    try:
        return tomllib.loads(f"x = {text}")["x"]
    except tomllib.TOMLDecodeError:
        return text


def normalize_overrides(overrides) -> dict:
    out = {}
    items = overrides.items() if isinstance(overrides, dict) else overrides
    for key, value in items:
        if "." not in key:
            raise ConfigError(f"override {key!r} must be section.key")
        section, name = key.split(".", 1)
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key}")
        if isinstance(value, str):
            parsed = parse_value(value)
            if SCHEMA[section][name][0] is str and not isinstance(parsed, str):
                parsed = value
            value = parsed
        out[key] = value
    return out


def parse_assignment(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def resolve_config_path(name_or_path: str | Path) -> Path:
    """A filesystem path, or the name of a bundled config."""
    candidate = Path(name_or_path)
    if candidate.exists():
        return candidate
    stem = candidate.name[:-5] if candidate.name.endswith(".toml") else candidate.name
    if stem in BUNDLED:
        return Path(str(resources.files("fwpf") / "configs" / f"{stem}.toml"))
    raise ConfigError(f"config not found: {name_or_path}")


def load_config(name_or_path, overrides=None) -> ScenarioConfig:
    path = resolve_config_path(name_or_path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values = flatten(doc)
    if overrides:
        values.update(normalize_overrides(overrides))
    return build_config(values, base_dir=path.parent, source=str(path))


def build_config(values: dict, base_dir=None, source=None) -> ScenarioConfig:
    """Validate flat ``section.key`` values and assemble a ScenarioConfig."""
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    v = {}
    for section, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            dotted = f"{section}.{key}"
            if dotted in values and values[dotted] is not None:
                v[dotted] = _coerce(dotted, values[dotted])
            elif default is _REQUIRED:
                raise ConfigError(f"missing required key {dotted}")
            else:
                v[dotted] = default
    try:
        return _assemble(v, base_dir, source)
    except ConfigError:
        raise
    except FwpfError as exc:
        raise ConfigError(str(exc)) from exc


def _section(v, name):
    prefix = name + "."
    return {k[len(prefix):]: val for k, val in v.items() if k.startswith(prefix)}


def _build_path(p, base_dir) -> PathDefinition:
    kind = p["kind"]
    if kind == "circle":
        return Circle((p["center_x"], p["center_y"]), p["radius"], p["direction"], p["phase"])
    if kind == "line":
        return Line((p["point_x"], p["point_y"]), p["heading"])
    if kind == "sampled":
        if not p["file"]:
            raise ConfigError("path.file is required for sampled paths")
        table = Path(p["file"])
        if not table.is_absolute():
            table = base_dir / table
        return SampledPath.from_file(table, max_turn=p["max_turn"])
    raise ConfigError(f"path.kind must be circle, line or sampled, got {kind!r}")


def _assemble(v, base_dir, source) -> ScenarioConfig:
    aero = AeroParams(**_section(v, "aero"))
    gains = Gains(**_section(v, "gains"))
    delta = DeltaFunction(**_section(v, "delta"))
    sp = _section(v, "setpoint")
    if not sp["lift_fraction"] > 0:
        raise ConfigError("setpoint.lift_fraction must be positive")
    v_d = sp["v_d"] if sp["v_d"] is not None else design_speed(aero, sp["lift_fraction"])
    if not v_d > 0:
        raise ConfigError("setpoint.v_d must be positive")
    gamma_d = sp["gamma_d"]

    path = _build_path(_section(v, "path"), base_dir)

    sim = _section(v, "sim")
    dt, t_end = sim["dt"], sim["t_end"]
    if not dt > 0:
        raise ConfigError("sim.dt must be positive")
    if not t_end >= dt:
        raise ConfigError("sim.t_end must be at least sim.dt")
    if sim["switch_mode"] not in SWITCH_MODES:
        raise ConfigError(f"sim.switch_mode must be one of {SWITCH_MODES}")
    if sim["qd_mode"] not in QD_MODES:
        raise ConfigError(f"sim.qd_mode must be one of {QD_MODES}")
    filter_tau = sim["filter_tau"] if sim["filter_tau"] is not None else 5.0 * dt
    if not filter_tau > 0:
        raise ConfigError("sim.filter_tau must be positive")
    if sim["thrust_max"] is not None and not sim["thrust_max"] > 0:
        raise ConfigError("sim.thrust_max must be positive")
    Q = ((sim["lyapunov_q11"], sim["lyapunov_q12"]), (sim["lyapunov_q12"], sim["lyapunov_q22"]))
    if not (Q[0][0] > 0 and Q[0][0] * Q[1][1] - Q[0][1] ** 2 > 0):
        raise ConfigError("Lyapunov Q must be positive definite")

    init = _section(v, "initial")
    s0 = init.pop("s")
    if init.pop("at_trim"):
        _, alpha_trim = trim(aero, v_d, gamma_d)
        px, py, psi_f, _ = path.frame(s0)
        initial = AircraftState(v_d, gamma_d, alpha_trim + gamma_d, 0.0, px, py, init["z"], psi_f)
    else:
        initial = AircraftState(**init)
    if not initial.v > sim["eps_v"]:
        raise ConfigError("initial.v must exceed sim.eps_v")

    dist = _section(v, "disturbance")
    disturbance = DisturbanceSignal(dist["kind"], dist["amplitude"], dist["frequency"])

    output_csv = v["output.csv"]
    if Path(output_csv).name != output_csv:
        raise ConfigError("output.csv must be a bare file name")

    return ScenarioConfig(
        aero=aero,
        gains=gains,
        delta=delta,
        path=path,
        v_d=v_d,
        gamma_d=gamma_d,
        initial=initial,
        s0=s0,
        dt=dt,
        t_end=t_end,
        disturbance=disturbance,
        qd_mode=sim["qd_mode"],
        filter_tau=filter_tau,
        switch_mode=sim["switch_mode"],
        eps_v=sim["eps_v"],
        eps_t=sim["eps_t"],
        thrust_max=sim["thrust_max"],
        Q=Q,
        output_csv=output_csv,
        values={k: val for k, val in v.items() if val is not None},
        source=source,
    )
