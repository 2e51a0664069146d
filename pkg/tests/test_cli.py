import csv
import json
import shutil
import subprocess
import sys

import pytest

from singcov.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norm_prints_json(capsys):
    code, out, _ = run(["norm", "--model", "fbm:0.3", "--f", "indicator:0,0.5"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["norm_H_sq"] == pytest.approx(0.5 ** 0.6, rel=1e-6)
    assert d["norm_R_sq"] == pytest.approx(d["norm_H_sq"], rel=1e-6)
    assert d["formal"] is False


def test_norm_formal_flag(capsys):
    code, out, _ = run(["norm", "--model", "fbm:0.7", "--f", "indicator:0,0.5"], capsys)
    assert code == 0 and json.loads(out)["formal"] is True


def test_inner(capsys):
    code, out, _ = run(["inner", "--model", "fbm:0.5", "--f", "indicator:0,0.5",
                        "--g", "indicator:0,0.75"], capsys)
    assert code == 0
    assert json.loads(out)["inner_H"] == pytest.approx(0.5, rel=1e-6)


def test_kernel_norm_is_refused(capsys):
    code, _, err = run(["norm", "--model", "kernel:tent", "--f", "indicator:0,0.5"], capsys)
    assert code == 2 and "error" in err


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["norm", "--model", "fbm:0.3"],
    ["norm", "--model", "nope:1", "--f", "indicator:0,0.5"],
    ["qv", "--model", "fbm:0.5", "--tol", "bogus_tol=1"],
    ["qv", "--model", "fbm:0.5", "--tol", "rel_tol"],
    ["verify", "--experiment", "exp_nothing"],
    ["integrate", "--model", "fbm:0.5", "--kind", "sideways"],
    ["suite", "--preset", "huge"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "fbm:0.3", "pathz": 10}))
    code, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 2 and "pathz" in err


def test_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "fbm:0.3", "paths": 10, "grid": 16}))
    out = tmp_path / "o"
    code, _, _ = run(["simulate", "--config", str(cfg), "--paths", "6", "--out", str(out)], capsys)
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["paths"] == 6 and rep["config"]["grid"] == 16
    rows = list(csv.reader((out / "paths.csv").open()))
    assert len(rows) == 1 + 6 and len(rows[0]) == 17


def test_simulate_outputs(tmp_path, capsys):
    out = tmp_path / "sim"
    code, _, _ = run(["simulate", "--model", "fbm:0.3", "--paths", "20", "--grid", "32",
                      "--out", str(out)], capsys)
    assert code == 0
    for name in ("report.json", "estimates.csv", "paths.csv"):
        assert (out / name).exists()
    rep = json.loads((out / "report.json").read_text())
    assert rep["command"] == "simulate" and rep["passed"] is True
    assert "out" not in rep["config"] and "threads" not in rep["config"]


def test_no_timestamp_reports_are_identical(tmp_path, capsys):
    texts = []
    for k, threads in enumerate(("1", "2")):
        out = tmp_path / f"r{k}"
        argv = ["verify", "--experiment", "exp_isometry", "--model", "fbm:0.3", "--f",
                "indicator:0,0.5", "--paths", "1000", "--grid", "64", "--threads", threads,
                "--out", str(out), "--no-timestamp"]
        assert run(argv, capsys)[0] == 0
        texts.append((out / "report.json").read_bytes())
    assert texts[0] == texts[1]


def test_verify_failure_exits_1(capsys):
    # an impossible tolerance forces a failed verdict
    code, out, _ = run(["verify", "--experiment", "exp_trace_convergence", "--model", "fbm:0.3",
                        "--tau", "0.5", "--tol", "rel_tol=1e-9"], capsys)
    assert code == 1 and "FAILED" in out


def test_verify_pass_exits_0(capsys):
    code, _, _ = run(["verify", "--experiment", "exp_hermite"], capsys)
    assert code == 0


def test_qv_and_check_and_integrate(capsys):
    assert run(["qv", "--model", "fbm:0.5", "--paths", "200", "--grid", "256",
                "--eps", "T/16..T/64"], capsys)[0] == 0
    code, out, _ = run(["check", "--model", "statinc:log"], capsys)
    assert code == 0 and "assumption D: verified" in out
    code, out, _ = run(["integrate", "--model", "fbm:0.3", "--paths", "100", "--grid", "64",
                        "--eps", "T/8..T/32", "--kind", "skorohod"], capsys)
    assert code == 0 and out.count("mean eps=") == 3


def test_suite_subset(tmp_path, capsys):
    out = tmp_path / "s"
    code, _, err = run(["suite", "--preset", "quick", "--only", "c09,c07", "--out", str(out)], capsys)
    assert code == 0
    assert err.count("PASS") == 3
    rep = json.loads((out / "report.json").read_text())
    assert [r["label"] for r in rep["reports"]][0] == "c07 trace fbm:0.3"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "singcov.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "singcov" in r.stdout


@pytest.mark.skipif(shutil.which("singcov") is None, reason="console script not installed")
def test_console_script_exit_code():
    r = subprocess.run(["singcov", "norm", "--model", "fbm:0.3"], capture_output=True, text=True)
    assert r.returncode == 2 and "--f" in r.stderr
