import subprocess
import sys

import pytest

from adaptive_smpc import cli, sim


def test_run_writes_trace(tmp_path, capsys):
    assert cli.main(["run", "--seed", "1", "--mode", "robust", "--out", str(tmp_path)]) == 0
    tr = sim.read_trace(tmp_path / "trace_robust_seed1.csv")
    assert tr.mode == "robust" and tr.completed
    assert "outcome=ok" in capsys.readouterr().out


def test_compare_and_montecarlo(tmp_path):
    assert cli.main(["compare", "--runs", "2", "--out", str(tmp_path / "c")]) == 0
    summary = sim.read_summary(tmp_path / "c" / "summary.json")
    assert summary.paired and summary.n_runs == 2
    assert cli.main(["montecarlo", "--runs", "2", "--base-seed", "4", "--traces",
                     "--out", str(tmp_path / "m")]) == 0
    assert (tmp_path / "m" / "trace_stochastic_seed5.csv").exists()


def test_estimate_only(tmp_path):
    assert cli.main(["estimate-only", "--seed", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "estimate_seed2.csv").exists()


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("dims: {n_u: 1}\nunknown: 3\n")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_SCENARIO
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_SCENARIO


def test_infeasible_run_exit_code(tmp_path):
    text = (sim.resources.files("adaptive_smpc") / "scenarios/benchmark.yaml").read_text()
    cfg = tmp_path / "tight.yaml"
    cfg.write_text(text.replace("  p: 1.0", "  p: -50.0"))
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_RUN_FAILED


def test_module_entry_point_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        subprocess.run([sys.executable, "-m", "adaptive_smpc", "run", "--seed", "9", "--out", str(out)],
                       check=True, capture_output=True)
        outs.append((out / "trace_stochastic_seed9.csv").read_bytes())
    assert outs[0] == outs[1]


def test_usage_error():
    with pytest.raises(SystemExit):
        cli.main(["run", "--mode", "greedy"])
