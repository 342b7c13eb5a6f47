import json
import subprocess
import sys

import pytest

from fwdgrad import bench, cli
from fwdgrad.bench import PerformanceProfile, records_from_csv, trace_from_csv
from fwdgrad.theory import ValidationReport, reports_from_json


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_list(capsys):
    code, out, _ = run(["list"], capsys)
    assert code == 0 and "rosenbrock-100" in out and "beale-2" in out
    code, out, _ = run(["list", "--json", "--dims", "2"], capsys)
    names = [d["name"] for d in json.loads(out)]
    assert code == 0 and "beale-2" in names and not any(n.endswith("-10") for n in names)


def test_run_is_deterministic(tmp_path, capsys):
    argv = ["run", "--problem", "sphere", "--dim", "2", "--optimizer", "sgd", "--oracle", "forward-rademacher", "--seed", "1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(argv + ["--out", a, "--svg", tmp_path / "a.svg"], capsys)[0] == 0
    assert run(argv + ["--out", b, "--svg", tmp_path / "b.svg"], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    trace = trace_from_csv(a.read_text())
    assert trace and trace[0][0] == 1


def test_run_to_stdout_and_tape(capsys):
    code, out, err = run(["run", "--problem", "booth", "--dim", "2", "--budget", "20", "--dump-tape"], capsys)
    assert code == 0 and out.startswith("evals,best_f\n")
    assert "booth-2" in err and err.startswith("w_0 <- x\n")


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["run", "--problem", "nope", "--dim", "2"], "--problem"),
        (["run", "--problem", "beale", "--dim", "3"], "--dim"),
        (["run", "--problem", "sphere", "--dim", "2", "--oracle", "forward-cauchy"], "--oracle"),
        (["run", "--problem", "sphere", "--dim", "2", "--optimizer", "newton"], "--optimizer"),
        (["run", "--problem", "sphere", "--dim", "2", "--lr", "-1"], "--lr"),
        (["run", "--problem", "sphere", "--dim", "2", "--budget", "0"], "--budget"),
        (["run", "--problem", "linear", "--dim", "2"], "--problem"),
        (["grid", "--dims", "2", "--jobs", "0"], "--jobs"),
        (["profile"], "records"),
        (["validate", "--claims", "no-such-claim"], "--claims"),
    ],
)
def test_usage_errors_name_the_flag(argv, flag, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert f"error: {flag}" in err


def test_unknown_flag_and_subcommand(capsys):
    assert run(["run", "--bogus"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def grid_argv(out, jobs=1):
    return [
        "grid", "--problem", "sphere,booth,rastrigin", "--dims", "2,10", "--optimizer", "sgd,adam",
        "--budget", "300", "--starts", "2", "--jobs", jobs, "--out", out, "--svg",
    ]


def test_grid_outputs_and_parallel_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(grid_argv(a), capsys)[0] == 0
    assert run(grid_argv(b, jobs=8), capsys)[0] == 0
    files = sorted(p.relative_to(a).as_posix() for p in a.rglob("*") if p.is_file())
    assert "records.csv" in files and "profile-2.json" in files and "profile-10.json" in files
    assert "profile-2.svg" in files and "curves/sphere-10.svg" in files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes(), f
    rows = records_from_csv((a / "records.csv").read_text())
    assert len(rows) == (3 + 2) * 4 * 2
    prof = PerformanceProfile.from_json((a / "profile-2.json").read_text())
    assert prof.to_json() == (a / "profile-2.json").read_text()


def test_grid_three_dimensions(tmp_path, capsys):
    out = tmp_path / "g"
    argv = ["grid", "--problem", "sphere", "--dims", "2,10,100", "--optimizer", "sgd", "--oracle", "true",
            "--budget", "50", "--starts", "1", "--out", out]
    assert run(argv, capsys)[0] == 0
    assert sorted(p.name for p in out.glob("profile-*.json")) == ["profile-10.json", "profile-100.json", "profile-2.json"]


def test_profile_recomputes_grid_profiles(tmp_path, capsys):
    a = tmp_path / "a"
    assert run(grid_argv(a), capsys)[0] == 0
    b = tmp_path / "b"
    assert run(["profile", a / "records.csv", "--out", b], capsys)[0] == 0
    assert run(["profile", a / "records.csv", "--out", tmp_path / "c"], capsys)[0] == 0
    for dim in (2, 10):
        name = f"profile-{dim}.json"
        assert (b / name).read_bytes() == (a / name).read_bytes()
        assert (b / name).read_bytes() == (tmp_path / "c" / name).read_bytes()


def test_validate_passes_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["validate", "--samples", "20000"]
    assert run(argv + ["--out", a], capsys)[0] == 0
    assert run(argv + ["--out", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    reports = reports_from_json(a.read_text())
    assert reports and all(r.passed for r in reports)


def test_validate_failure_exits_one(monkeypatch, capsys):
    bad = [ValidationReport("forced", 0.0, 1.0, "exhaustive", 0.0)]
    monkeypatch.setattr(cli, "run_all_validations", lambda cfg: bad)
    code, _, err = run(["validate"], capsys)
    assert code == 1 and "FAIL forced" in err


def test_validate_tangent_law(capsys):
    code, out, _ = run(["validate", "tangent-law", "--oracle", "forward-rademacher,forward-rotated", "--dim", "4",
                        "--samples", "20000"], capsys)
    assert code == 0
    reports = json.loads(out)
    assert [r["oracle"] for r in reports] == ["forward-rademacher", "forward-rotated"]
    assert reports[0]["verdicts"]["minimal"] and not reports[1]["verdicts"]["minimal"]
    assert run(["validate", "tangent-law", "--oracle", "true"], capsys)[0] == 2


def test_trajectory(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["trajectory", "--dim", "100", "--budget", "10", "--svg", tmp_path / "t.svg"]
    assert run(argv + ["--out", a], capsys)[0] == 0
    assert run(argv + ["--out", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("optimizer,oracle,start_index,step,f,theta_0")
    assert len(lines) == 1 + 2 * 11
    code, out, _ = run(["trajectory", "--problem", "rosenbrock", "--dim", "2", "--budget", "5", "--optimizer", "adam"], capsys)
    assert code == 0 and out.count("\n") == 1 + 2 * 6


def test_config_merge(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# trial settings\nproblem = sphere\ndim = 2\nbudget = 30\nstart-index = 1\n")
    code, out_cfg, _ = run(["run", "--config", cfg], capsys)
    code2, out_flags, _ = run(["run", "--problem", "sphere", "--dim", "2", "--budget", "30", "--start-index", "1"], capsys)
    assert code == code2 == 0 and out_cfg == out_flags
    # explicit flags win over the file
    _, out_override, _ = run(["run", "--config", cfg, "--budget", "10"], capsys)
    assert len(out_override.splitlines()) < len(out_cfg.splitlines())
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    code, _, err = run(["run", "--config", bad], capsys)
    assert code == 2 and "unknown key" in err
    bad.write_text("no equals sign\n")
    assert run(["run", "--config", bad], capsys)[0] == 2
    assert run(["run", "--config", tmp_path / "missing.cfg"], capsys)[0] == 2


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "fwdgrad", "list", "--dims", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and "sphere-2" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "fwdgrad", "run", "--problem", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2


def test_csv_readers_accept_cli_output(tmp_path, capsys):
    out = tmp_path / "g"
    run(grid_argv(out), capsys)
    rows = records_from_csv((out / "records.csv").read_text())
    names, T = bench.t_matrix(rows, sorted({f"{r['optimizer']}/{r['oracle']}" for r in rows}))
    assert len(names) == 5 and T.shape == (5, 4)
