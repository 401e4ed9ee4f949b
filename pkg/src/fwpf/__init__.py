"""Fixed-wing UAV longitudinal and Serret-Frenet path-following control."""

from .config import ScenarioConfig, load_config
from .controller import Controller, DeltaFunction, Gains, Setpoint, full_control
from .dynamics import AeroParams, AircraftState, ControlInput, state_derivative, trim
from .errors import (
    ConfigError,
    DomainError,
    FwpfError,
    GeometryError,
    IntegrationFault,
    LyapunovError,
    PathDomainError,
    SingularityError,
)
from .lyapunov import ErrorVector, LyapunovReport, check_gas_condition, solve_lyapunov_2x2
from .path import Circle, Line, SampledPath, tracking_errors
from .sim import TrajectoryLog, read_log, rk4_step, run_scenario, write_log

__all__ = [
    "AeroParams", "AircraftState", "Circle", "ConfigError", "ControlInput", "Controller",
    "DeltaFunction", "DomainError", "ErrorVector", "FwpfError", "Gains", "GeometryError",
    "IntegrationFault", "Line", "LyapunovError", "LyapunovReport", "PathDomainError",
    "SampledPath", "ScenarioConfig", "Setpoint", "SingularityError", "TrajectoryLog",
    "check_gas_condition", "full_control", "load_config", "read_log", "rk4_step",
    "run_scenario", "solve_lyapunov_2x2", "state_derivative", "tracking_errors", "trim",
    "write_log",
]
