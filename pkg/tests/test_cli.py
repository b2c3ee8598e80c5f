"""CLI surface: exit codes, output schemas, and determinism.

Handlers are exercised in-process through main(argv); one subprocess test
confirms the module entry point wires up the same dispatcher.
"""

import json
import subprocess
import sys

import pytest

from replearn.cli import main


def run_cli(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_help_exits_zero(capsys):
    code, out, _ = run_cli(capsys, ["--help"])
    assert code == 0
    assert "COMMAND" in out


def test_no_command_is_usage_error(capsys):
    code, _, err = run_cli(capsys, [])
    assert code == 1
    assert "usage" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run_cli(capsys, ["learn", "--sideways"])
    assert code == 1
    assert "error" in err


def test_learn_requires_params(capsys):
    code, _, err = run_cli(capsys, ["learn", "--d", "1", "--k", "7"])
    assert code == 1
    assert "missing required parameters" in err


LEARN_ARGS = ["learn", "--d", "1", "--k", "7", "--epsilon", "0.3",
              "--rho", "0.1", "--n", "6", "--seed", "12"]


def test_learn_runs_and_is_deterministic(capsys):
    code, out1, _ = run_cli(capsys, LEARN_ARGS)
    assert code == 0
    assert "target" in out1 and "exact_error" in out1 and "radius" in out1
    code, out2, _ = run_cli(capsys, LEARN_ARGS)
    assert code == 0 and out2 == out1


def test_learn_json_payload(capsys):
    code, out, _ = run_cli(capsys, LEARN_ARGS + ["--json"])
    assert code == 0
    payload = json.loads(out)
    assert set(payload) >= {"target", "output", "exact_error", "radius", "seed"}
    assert len(payload["target"]) == 1


REPL_ARGS = ["replicate", "--d", "2", "--k", "5", "--epsilon", "0.3",
             "--rho", "0.1", "--n", "10", "--trials", "16", "--seed", "3",
             "--threads", "1"]


def test_replicate_prints_csv(capsys):
    code, out, _ = run_cli(capsys, REPL_ARGS)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("d,k,epsilon,rho_target")
    assert len(lines) == 2
    assert len(lines[1].split(",")) == len(lines[0].split(","))


def test_replicate_out_file_and_json(tmp_path, capsys):
    out_file = tmp_path / "rep.csv"
    code, _, _ = run_cli(capsys, REPL_ARGS + ["--out", str(out_file)])
    assert code == 0
    text = out_file.read_text().splitlines()
    assert text[0].startswith("d,k,epsilon,rho_target,delta,n,radius,trials")
    code, out, _ = run_cli(capsys, REPL_ARGS + ["--json"])
    assert code == 0
    payload = json.loads(out)
    assert payload["trials"] == 16
    assert 0.0 <= payload["rho_hat"] <= 1.0


def test_sweep_needs_out(capsys):
    code, _, err = run_cli(capsys, [
        "sweep", "--d", "2", "--k", "5", "--epsilon", "0.3", "--rho", "0.1",
        "--n", "10", "--trials", "8",
    ])
    assert code == 1
    assert "--out" in err


def test_sweep_writes_grid(tmp_path, capsys):
    out_file = tmp_path / "sweep.csv"
    config = tmp_path / "cfg.txt"
    config.write_text(
        "d=2\nk=5\nepsilon=0.3\nrho=0.1\nn=10\ntrials=8\nsweep_n=5,10\n"
    )
    code, out, _ = run_cli(capsys, [
        "sweep", "--config", str(config), "--out", str(out_file),
        "--threads", "1",
    ])
    assert code == 0
    assert "wrote 2 rows" in out
    lines = out_file.read_text().splitlines()
    assert len(lines) == 3


def test_config_master_seed_survives_without_seed_flag(tmp_path, capsys):
    # regression: the --seed default used to clobber a config master_seed
    config = tmp_path / "cfg.txt"
    config.write_text(
        "d=2\nk=5\nepsilon=0.3\nrho=0.1\nn=10\ntrials=8\nmaster_seed=77\n"
    )
    code, out, _ = run_cli(capsys, [
        "replicate", "--config", str(config), "--threads", "1", "--json",
    ])
    assert code == 0
    assert json.loads(out)["master_seed"] == 77
    code, out, _ = run_cli(capsys, [
        "replicate", "--config", str(config), "--threads", "1", "--json",
        "--seed", "5",
    ])
    assert code == 0
    assert json.loads(out)["master_seed"] == 5


def test_threads_zero_rejected(capsys):
    code, _, err = run_cli(capsys, REPL_ARGS[:-1] + ["0"])
    assert code == 1
    assert "threads" in err


def test_mode_micro_and_gate(capsys):
    code, out, _ = run_cli(capsys, [
        "mode", "--d", "1", "--k", "3", "--epsilon", "0.3", "--rho", "0.1",
        "--n", "2", "--seed", "5",
    ])
    assert code == 0
    assert "mode_probability" in out and "mode_labeling" in out
    code, _, err = run_cli(capsys, [
        "mode", "--d", "2", "--k", "5", "--epsilon", "0.3", "--rho", "0.1",
        "--n", "9",
    ])
    assert code == 2
    assert "resource limit" in err


def test_spectrum_dense_and_csv(tmp_path, capsys):
    code, out, _ = run_cli(capsys, ["spectrum", "--d", "1", "--k", "5"])
    assert code == 0
    assert "dense_max_dev" in out and "trace" in out
    code, out, _ = run_cli(capsys, ["spectrum", "--d", "1", "--k", "5",
                                    "--no-dense"])
    assert code == 0
    assert "dense_max_dev" not in out
    out_file = tmp_path / "spec.csv"
    code, out, _ = run_cli(capsys, ["spectrum", "--d", "2", "--k", "5",
                                    "--out", str(out_file)])
    assert code == 0
    lines = out_file.read_text().splitlines()
    assert lines[0] == "index,eigenvalue"
    assert len(lines) == 26
    code, _, err = run_cli(capsys, ["spectrum", "--d", "2"])
    assert code == 1


def test_expansion_ball(capsys):
    code, out, _ = run_cli(capsys, [
        "expansion", "--d", "2", "--k", "5", "--ball-radius", "1", "--json",
    ])
    assert code == 0
    payload = json.loads(out)
    assert payload["set_size"] == 5
    assert payload["expansion_ratio"] == pytest.approx(21 / 45)


def test_tail_reports_exact_at_small_scale(capsys):
    code, out, _ = run_cli(capsys, [
        "tail", "--d", "2", "--k", "11", "--r", "2", "--trials", "2000",
        "--seed", "8",
    ])
    assert code == 0
    assert "0 violations" in out
    assert "p_exact" in out


def test_coupling_explicit_laws(capsys):
    code, out, _ = run_cli(capsys, ["coupling", "--x", "1,1", "--y", "2,0"])
    assert code == 0
    assert "1: 1, 0" in out
    code, _, err = run_cli(capsys, ["coupling", "--x", "1,1"])
    assert code == 1
    code, _, err = run_cli(capsys, ["coupling", "--x", "1,0", "--y", "0,1"])
    assert code == 1
    assert "dominance" in err


def test_coupling_built_from_pre_pass(capsys):
    code, out, _ = run_cli(capsys, [
        "coupling", "--d", "2", "--k", "11", "--n", "2",
        "--pre-trials", "5000", "--seed", "2",
    ])
    assert code == 0
    assert "regime" in out and "size_law" in out


def test_step_verify_dominance_abort_exits_three(capsys):
    code, _, err = run_cli(capsys, [
        "step-verify", "--d", "2", "--k", "11", "--n", "10",
        "--trials", "100", "--pre-trials", "3000", "--seed", "4",
    ])
    assert code == 3
    assert "not CDF-dominated" in err


def test_step_verify_valid_regime(capsys):
    code, out, _ = run_cli(capsys, [
        "step-verify", "--d", "2", "--k", "11", "--n", "2",
        "--trials", "5000", "--pre-trials", "20000", "--seed", "4",
    ])
    assert code == 0
    assert "tv_direction" in out


def test_balls_command(tmp_path, capsys):
    code, out, _ = run_cli(capsys, ["balls", "--d", "2", "--r", "2", "--k", "5"])
    assert code == 0
    assert "count 13" in out
    out_file = tmp_path / "shells.csv"
    code, _, _ = run_cli(capsys, ["balls", "--d", "2", "--r", "2", "--k", "5",
                                  "--out", str(out_file)])
    assert code == 0
    lines = out_file.read_text().splitlines()
    assert lines[0] == "t,count,cumulative"
    assert lines[-1].endswith(",13")
    code, _, _ = run_cli(capsys, ["balls", "--d", "2"])
    assert code == 1


def test_lo_check_routes(capsys):
    code, out, _ = run_cli(capsys, ["lo-check", "--coeffs", "1,1", "--k", "5"])
    assert code == 0
    assert "exact" in out
    code, _, err = run_cli(capsys, ["lo-check", "--coeffs", "1,a", "--k", "5"])
    assert code == 1
    code, _, err = run_cli(capsys, ["lo-check", "--coeffs", "5", "--k", "5"])
    assert code == 1
    assert "nonzero" in err
    code, _, _ = run_cli(capsys, ["lo-check", "--k", "5"])
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "replearn", "balls", "--d", "1", "--r", "2",
         "--k", "7"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "count 5" in proc.stdout
