"""Command-line front end.

    fwpf run    --config paper_nominal --out results
    fwpf verify --config paper_nominal --set setpoint.v_d=5
    fwpf sweep  --config paper_nominal --sweep gains.k_omega=5,20.25,50 --out sweep

Exit codes: 0 success, 1 verification failure, 2 config error, 3 numerical fault.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .config import BUNDLED, ScenarioConfig, load_config, parse_assignment
from .errors import ConfigError, FwpfError
from .lyapunov import assess_decrease, check_gas_condition, is_positive_definite, lyapunov_residual
from .sim import SimulationAborted, run_scenario, write_log

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_FAULT = 3

CONSTRAINT_TOL = 1e-12
RESIDUAL_TOL = 1e-12
MIN_NONINCREASING = 0.99
MIN_CORRELATION = 0.99


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


def _emit(lines, quiet=False):
    if quiet:
        return
    for key, value in lines:
        print(f"{key}: {value}")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".6g")
    return str(x)


def summarize(config: ScenarioConfig, log, report, runtime: float) -> list[tuple[str, str]]:
    """Human-readable ``key: value`` pairs; angles in degrees here only."""
    last = log.data[-1]
    col = {c: last[i] for i, c in enumerate(log.columns)}
    half = log.tail(0.5)
    out = [
        ("config", config.source or "<memory>"),
        ("steps", len(log) - 1),
        ("dt", _fmt(config.dt)),
        ("t_end", _fmt(float(col["t"]))),
        ("v_d", _fmt(config.v_d)),
        ("v_final", _fmt(float(col["v"]))),
        ("alpha_final_deg", _fmt(math.degrees(col["alpha"]))),
        ("gamma_final_deg", _fmt(math.degrees(col["gamma"]))),
        ("e_s_final", _fmt(float(col["e_s"]))),
        ("e_d_final", _fmt(float(col["e_d"]))),
        ("psi_tilde_final_deg", _fmt(math.degrees(col["psi_tilde"]))),
        ("max_abs_e_d_last_half", _fmt(float(np.max(np.abs(half["e_d"]))))),
        ("V_initial", _fmt(float(report.V[0]))),
        ("V_final", _fmt(float(report.V[-1]))),
        ("level_l", _fmt(report.level_l)),
        ("sqrt_2l", _fmt(math.sqrt(2.0 * report.level_l))),
        ("disturbance", config.disturbance.kind),
    ]
    for name, count in getattr(log, "events", {}).items():
        out.append((f"events_{name}", count))
    out.append(("runtime_s", f"{runtime:.3f}"))
    return out


def _outside_layers(log, config) -> np.ndarray:
    g = config.gains
    return (np.abs(log["e_s"]) > g.phi_s) | (np.abs(log["psi_tilde"] - log["delta"]) > g.phi_omega)


def run_checks(config: ScenarioConfig, log, report) -> list[Check]:
    """Lyapunov and invariant battery for one completed run."""
    checks = []
    g = config.gains

    gap = float(np.max(np.abs(log["theta_d"] - (log["alpha_d"] + config.gamma_d))))
    checks.append(Check("theta_d_constraint", gap <= CONSTRAINT_TOL, f"max |theta_d - alpha_d - gamma_d| = {gap:.3g}"))

    residual = lyapunov_residual(report.P, g.k_theta1, g.k_theta2, report.Q)
    eig = float(np.min(np.linalg.eigvalsh(report.P.astype(float))))
    checks.append(Check(
        "lyapunov_equation",
        residual < RESIDUAL_TOL and is_positive_definite(report.P),
        f"residual = {residual:.3g}, min eig(P) = {eig:.6g}",
    ))

    finite = bool(np.all(np.isfinite(log.data)))
    checks.append(Check("finite_log", finite, f"{len(log)} rows"))

    gas = check_gas_condition(report)
    vacuous = gas.sqrt_2l < 10.0 * config.dt
    checks.append(Check(
        "gas_condition",
        gas.condition_ok,
        f"v_d = {gas.v_d:.6g} vs sqrt(2 l) = {gas.sqrt_2l:.6g} (l = {gas.level_l:.6g})"
        + (" [vacuous: trajectory within integration tolerance of equilibrium]" if vacuous else ""),
    ))

    if config.disturbance.enabled:
        e_d = float(np.max(np.abs(log.tail(0.5)["e_d"])))
        checks.append(Check("bounded_tracking", math.isfinite(e_d), f"max |e_d| over last half = {e_d:.6g}"))
        return checks

    if vacuous:
        checks.append(Check("lyapunov_decrease", True, "vacuous: l ~ 0"))
        return checks

    stats = assess_decrease(report, _outside_layers(log, config))
    checks.append(Check(
        "lyapunov_decrease",
        stats.fraction_nonincreasing >= MIN_NONINCREASING and stats.max_violation <= stats.band,
        f"{stats.fraction_nonincreasing:.4f} of {stats.steps_checked} steps outside layers nonincreasing, "
        f"max increase {stats.max_violation:.3g} (band {stats.band:.3g})",
    ))
    checks.append(Check(
        "vdot_correlation",
        stats.correlation > MIN_CORRELATION,
        f"corr(numeric, closed form) = {stats.correlation:.6f}",
    ))
    return checks


def _load(args, extra=()) -> ScenarioConfig:
    overrides = [parse_assignment(s) for s in args.set or ()]
    overrides.extend(extra)
    return load_config(args.config, overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_and_write(config: ScenarioConfig, csv_path: Path):
    """Run one scenario, write its CSV (partial on a fault) and return ``(log, report, runtime)``."""
    start = time.perf_counter()
    try:
        log, report = run_scenario(config)
    except SimulationAborted as exc:
        write_log(exc.partial, csv_path)
        raise
    runtime = time.perf_counter() - start
    write_log(log, csv_path)
    return log, report, runtime


def _fault_lines(exc: SimulationAborted, csv_path: Path):
    return [
        ("status", "fault"),
        ("error", str(exc)),
        ("component", exc.component),
        ("t", _fmt(exc.t) if exc.t is not None else "?"),
        ("rows_flushed", len(exc.partial)),
        ("csv", csv_path),
    ]


def cmd_run(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    csv_path = out / config.output_csv
    try:
        log, report, runtime = _run_and_write(config, csv_path)
    except SimulationAborted as exc:
        _emit(_fault_lines(exc, csv_path))
        return EXIT_FAULT
    lines = summarize(config, log, report, runtime) + [("csv", csv_path), ("status", "ok")]
    # runtime left out so the file is reproducible
    (out / (Path(config.output_csv).stem + "_summary.txt")).write_text(
        "".join(f"{k}: {v}\n" for k, v in lines if k != "runtime_s"), encoding="utf-8"
    )
    _emit(lines, args.quiet)
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    csv_path = out / config.output_csv
    try:
        log, report, runtime = _run_and_write(config, csv_path)
    except SimulationAborted as exc:
        _emit(_fault_lines(exc, csv_path))
        return EXIT_FAULT
    if args.verbose:
        _emit(summarize(config, log, report, runtime))
    checks = run_checks(config, log, report)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    _emit([("checks_passed", f"{len(checks) - len(failed)}/{len(checks)}"),
           ("status", "fail" if failed else "ok")])
    return EXIT_VERIFY if failed else EXIT_OK


def parse_sweep(text: str) -> tuple[str, list[str]]:
    key, raw = parse_assignment(text)
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"sweep over {key} has no values")
    if len(set(values)) != len(values):
        raise ConfigError(f"sweep over {key} repeats a value")
    return key, values


INDEX_COLUMNS = ("index", "key", "value", "csv", "status", "e_s", "e_d", "psi_tilde",
                 "v_err", "gamma_err", "error_norm")


def _sweep_one(job):
    config, csv_path, index, key, value = job
    try:
        log, _, _ = _run_and_write(config, csv_path)
    except SimulationAborted as exc:
        return (index, key, value, csv_path.name, f"fault: {exc}") + ("nan",) * 6
    last = {c: float(log[c][-1]) for c in ("e_s", "e_d", "psi_tilde", "v_err", "gamma_err")}
    norm = math.sqrt(sum(x * x for x in last.values()))
    return (index, key, value, csv_path.name, "ok") + tuple(format(x, ".9g") for x in (*last.values(), norm))


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in ".-" else "_" for ch in text)


def cmd_sweep(args) -> int:
    key, values = parse_sweep(args.sweep)
    base = [parse_assignment(s) for s in args.set or ()]
    configs = [load_config(args.config, base + [(key, v)]) for v in values]
    out = _out_dir(args)
    jobs = []
    for i, (value, config) in enumerate(zip(values, configs)):
        name = f"sweep_{_slug(key)}_{_slug(value)}.csv"
        jobs.append((config, out / name, i, key, value))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(job) for job in jobs]
    index_path = out / "sweep_index.csv"
    with open(index_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INDEX_COLUMNS)
        writer.writerows(rows)
    faults = sum(1 for r in rows if r[4] != "ok")
    _emit([("runs", len(rows)), ("faults", faults), ("index", index_path),
           ("status", "fault" if faults else "ok")], args.quiet)
    return EXIT_FAULT if faults else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fwpf",
        description="Fixed-wing UAV path-following controller: simulate and verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "simulate a scenario and write its CSV log and summary"),
        ("verify", "simulate and run the Lyapunov/invariant checks"),
        ("sweep", "simulate once per value of one config key"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", default="paper_nominal",
                       help=f"TOML file or bundled name ({', '.join(BUNDLED)})")
        p.add_argument("--out", default="fwpf_out", help="output directory (default: fwpf_out)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, e.g. sim.dt=0.0005 (repeatable)")
        verbosity = p.add_mutually_exclusive_group()
        verbosity.add_argument("-q", "--quiet", action="store_true")
        verbosity.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            p.add_argument("--sweep", required=True, metavar="KEY=V1,V2,...",
                           help="key and comma-separated values")
            p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FwpfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
