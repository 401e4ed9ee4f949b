import csv
import subprocess
import sys

import pytest

from fwpf.cli import EXIT_CONFIG, EXIT_FAULT, EXIT_OK, EXIT_VERIFY, main, parse_sweep
from fwpf.errors import ConfigError
from fwpf.sim import read_log

SHORT = ["--set", "sim.t_end=2.0"]


def _files(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_run_writes_csv_and_summary(workdir, capsys):
    assert main(["run", "--out", "o", *SHORT]) == EXIT_OK
    out = capsys.readouterr().out
    assert "status: ok" in out and "alpha_final_deg:" in out
    log = read_log(workdir / "o" / "paper_nominal.csv")
    assert len(log) == 2001
    summary = (workdir / "o" / "paper_nominal_summary.txt").read_text()
    assert "runtime_s" not in summary and "v_d: 78.3023" in summary


def test_run_disturbed(workdir):
    assert main(["run", "--config", "paper_disturbed", "--out", "o", "-q", *SHORT]) == EXIT_OK
    assert (workdir / "o" / "paper_disturbed.csv").exists()


def test_halving_dt_doubles_rows_minus_one(workdir):
    main(["run", "--out", "a", "-q", *SHORT])
    main(["run", "--out", "b", "-q", *SHORT, "--set", "sim.dt=0.0005"])
    n_a = len(read_log(workdir / "a" / "paper_nominal.csv"))
    n_b = len(read_log(workdir / "b" / "paper_nominal.csv"))
    assert n_b == 2 * n_a - 1


def test_nothing_written_outside_out(workdir):
    main(["run", "--out", "o", "-q", *SHORT])
    main(["verify", "--out", "o", "-q", *SHORT])
    main(["sweep", "--out", "o", "-q", *SHORT, "--sweep", "gains.k_s=1,2"])
    assert all(p.parts[0] == "o" for p in _files(workdir))


def test_quiet_run_is_silent(workdir, capsys):
    assert main(["run", "--out", "o", "-q", *SHORT]) == EXIT_OK
    assert capsys.readouterr().out == ""


# --- exit codes ------------------------------------------------------------------


def test_unknown_override_is_config_error(workdir, capsys):
    assert main(["run", "--out", "o", "--set", "gains.k_vv=3"]) == EXIT_CONFIG
    assert "gains.k_vv" in capsys.readouterr().err
    assert not (workdir / "o").exists()


def test_malformed_toml_is_config_error(workdir, capsys):
    bad = workdir / "bad.toml"
    bad.write_text("[aero\n")
    assert main(["run", "--config", str(bad), "--out", "o"]) == EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err


def test_missing_config_is_config_error(workdir):
    assert main(["run", "--config", "nope.toml", "--out", "o"]) == EXIT_CONFIG


def test_fault_exit_and_partial_csv(workdir, capsys):
    code = main(["run", "--out", "o", "--set", "sim.qd_mode=zero", *SHORT])
    assert code == EXIT_FAULT
    out = capsys.readouterr().out
    assert "status: fault" in out and "SingularityError" in out
    partial = read_log(workdir / "o" / "paper_nominal.csv")
    assert 0 < len(partial) < 2001


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["launch"])
    assert exc.value.code == 2


def test_module_entry_point(workdir):
    proc = subprocess.run(
        [sys.executable, "-m", "fwpf", "run", "--out", "o", "-q", "--set", "sim.t_end=0.01"],
        capture_output=True, text=True, cwd=workdir,
    )
    assert proc.returncode == EXIT_OK, proc.stderr


# --- verify ---------------------------------------------------------------------------


def test_verify_nominal_passes(workdir, capsys):
    assert main(["verify", "--out", "o", "--set", "sim.t_end=20.0"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    for name in ("theta_d_constraint", "lyapunov_equation", "gas_condition", "lyapunov_decrease"):
        assert f"PASS {name}" in out


def test_verify_low_speed_falsifies(workdir, capsys):
    code = main(["verify", "--out", "o", "--set", "setpoint.v_d=5", *SHORT])
    assert code == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "FAIL gas_condition" in out and "status: fail" in out


def test_verify_trim_start_vacuous(workdir, capsys):
    assert main(["verify", "--config", "trim_start", "--out", "o"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "vacuous" in out


def test_verify_disturbed_reports_bound(workdir, capsys):
    assert main(["verify", "--config", "paper_disturbed", "--out", "o", *SHORT]) == EXIT_OK
    assert "PASS bounded_tracking: max |e_d| over last half =" in capsys.readouterr().out


# --- sweep ------------------------------------------------------------------------------


SWEEP = ["--sweep", "gains.k_omega=5,20.25,50"]


def _index(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_writes_one_csv_per_value(workdir):
    assert main(["sweep", "--out", "s", "-q", *SHORT, *SWEEP]) == EXIT_OK
    rows = _index(workdir / "s" / "sweep_index.csv")
    assert [r["value"] for r in rows] == ["5", "20.25", "50"]
    assert all(r["status"] == "ok" and float(r["error_norm"]) >= 0 for r in rows)
    for r in rows:
        assert (workdir / "s" / r["csv"]).exists()


def test_sweep_deterministic_and_order_independent(workdir):
    main(["sweep", "--out", "a", "-q", *SHORT, *SWEEP])
    main(["sweep", "--out", "b", "-q", *SHORT, "--sweep", "gains.k_omega=50,5,20.25", "--jobs", "2"])
    for name in ("sweep_gains.k_omega_5.csv", "sweep_gains.k_omega_20.25.csv", "sweep_gains.k_omega_50.csv"):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()
    by_value = {r["value"]: r for r in _index(workdir / "b" / "sweep_index.csv")}
    for r in _index(workdir / "a" / "sweep_index.csv"):
        other = by_value[r["value"]]
        assert {k: v for k, v in r.items() if k != "index"} == {k: v for k, v in other.items() if k != "index"}


def test_empty_sweep_is_config_error(workdir):
    assert main(["sweep", "--out", "s", "--sweep", "gains.k_omega="]) == EXIT_CONFIG
    assert not (workdir / "s").exists()


def test_sweep_bad_key_is_config_error(workdir):
    assert main(["sweep", "--out", "s", "--sweep", "gains.k_x=1,2"]) == EXIT_CONFIG


def test_parse_sweep():
    assert parse_sweep("gains.k_s = 1, 2 ,3") == ("gains.k_s", ["1", "2", "3"])
    with pytest.raises(ConfigError):
        parse_sweep("gains.k_s=1,1")
