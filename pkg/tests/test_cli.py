import csv
import json
import shlex
import subprocess
import sys

import pytest

from lcpkit.cli import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main

PLANTED = "planted:domain=simplex,n=40,m=15,d=1"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def config_line(out):
    lines = [l for l in out.splitlines() if l.startswith("# effective-config:")]
    assert len(lines) == 1
    return lines[0]


def strip_elapsed(doc):
    for r in doc["records"]:
        r.pop("elapsed")
    return doc


def test_solve_writes_trace(tmp_path, capsys):
    out_path = tmp_path / "t.json"
    code, out, _ = run(["solve", "--algorithm", "cndg", "--iters", "10", "--instance", PLANTED,
                        "--out", str(out_path)], capsys)
    assert code == EXIT_OK
    doc = json.loads(out_path.read_text())
    assert len([r for r in doc["records"] if r["k"] > 0]) == 10
    assert doc["oracle_calls"] == 10


def test_effective_config_reproduces_run(tmp_path, capsys):
    a = tmp_path / "a.json"
    code, out, _ = run(["solve", "--algorithm", "pda", "--iters", "30", "--instance", PLANTED,
                        "--seed", "3", "--out", str(a)], capsys)
    line = config_line(out)
    argv = shlex.split(line.split(":", 1)[1])[1:]
    b = tmp_path / "b.json"
    argv[argv.index("--out") + 1] = str(b)
    assert main(argv) == EXIT_OK
    assert strip_elapsed(json.loads(a.read_text())) == strip_elapsed(json.loads(b.read_text()))


@pytest.mark.parametrize("alg", ["cndg", "pa", "pda"])
@pytest.mark.parametrize("step", ["open", "linesearch"])
def test_certify_on_planted(alg, step, capsys):
    code, _, _ = run(["solve", "--algorithm", alg, "--step", step, "--iters", "200",
                      "--instance", PLANTED, "--certify"], capsys)
    assert code == EXIT_OK


def test_certify_smooth_rand_shrink(capsys):
    assert run(["solve", "--algorithm", "smooth", "--iters", "200", "--certify",
                "--instance", "game:prox=entropy,m=20,n=20"], capsys)[0] == EXIT_OK
    assert run(["solve", "--algorithm", "rand", "--iters", "50", "--certify",
                "--instance", "game:prox=ball,m=10,n=10"], capsys)[0] == EXIT_OK
    assert run(["solve", "--algorithm", "shrink", "--certify", "--instance", "strong:n=10"], capsys)[0] == EXIT_OK


def test_shrink_on_simplex_is_config_error(capsys):
    code, out, err = run(["solve", "--algorithm", "shrink", "--instance", PLANTED], capsys)
    assert code == EXIT_CONFIG
    assert "configuration error" in err
    config_line(out)


@pytest.mark.parametrize("argv", [
    ["solve", "--algorithm", "smooth", "--instance", PLANTED],
    ["solve", "--algorithm", "cndg", "--instance", "game:m=5,n=5"],
    ["solve", "--instance", "nonsense:x=1"],
    ["solve", "--instance", "planted:n=5"],
    ["solve", "--instance", "planted:domain=simplex,n=5,m=3,d=2"],
    ["solve", "--instance", PLANTED, "--iters", "0"],
    ["lowerbound", "--n", "100", "--iters", "200"],
    ["lowerbound", "--family", "smooth", "--algorithm", "rand", "--iters", "5"],
    ["lowerbound", "--family", "nonsmooth", "--algorithm", "cndg", "--iters", "5"],
    ["lowerbound", "--family", "smooth", "--algorithm", "shrink", "--iters", "5"],
    ["gen", "--out", "x.json"],
    ["gen", "--name", "ABC11", "--out", "x.json"],
])
def test_config_errors(argv, capsys):
    assert run(argv, capsys)[0] == EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ["solve", "--bogus", "1", "--instance", PLANTED],
    ["frobnicate"],
    ["solve", "--algorithm", "newton", "--instance", PLANTED],
    [],
])
def test_usage_errors_exit_64(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_USAGE


def test_certificate_violation_exit_code(monkeypatch, capsys):
    from lcpkit import cli
    real = cli.load_problem

    def lying(*a, **k):
        prob = real(*a, **k)
        prob["f_star"] = -1e6  # claims a far lower optimum than the planted zero
        return prob

    monkeypatch.setattr(cli, "load_problem", lying)
    assert run(["solve", "--iters", "5", "--instance", PLANTED, "--certify"], capsys)[0] == EXIT_VIOLATION


def test_plot_data(tmp_path, capsys):
    p = tmp_path / "plot.csv"
    run(["solve", "--algorithm", "pa", "--iters", "20", "--instance", PLANTED,
         "--emit-plot-data", str(p)], capsys)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["k", "gap", "bound"]
    assert len(rows) == 22
    assert rows[1][2] == "" and float(rows[2][2]) > 0


def test_gen_then_solve(tmp_path, capsys):
    p = tmp_path / "i.json"
    assert run(["gen", "--name", "HYB11", "--out", str(p)], capsys)[0] == EXIT_OK
    assert run(["solve", "--instance", str(p), "--iters", "20", "--certify"], capsys)[0] == EXIT_OK
    q = tmp_path / "j.json"
    assert run(["gen", "--domain", "hypercube", "--n", "10", "--m", "4", "--out", str(q)], capsys)[0] == EXIT_OK
    assert run(["solve", "--instance", "CUB11", "--iters", "20", "--certify"], capsys)[0] == EXIT_OK


def test_lowerbound_commands(tmp_path, capsys):
    p = tmp_path / "lb.json"
    code, out, _ = run(["lowerbound", "--family", "smooth", "--n", "100", "--algorithm", "cndg",
                        "--iters", "50", "--out", str(p)], capsys)
    assert code == EXIT_OK
    rep = json.loads(p.read_text())
    assert len(rep["per_iteration"]) == 50 and rep["ok"]
    code, out, _ = run(["lowerbound", "--family", "nonsmooth", "--n", "60", "--algorithm", "rand",
                        "--iters", "30", "--seeds", "5", "--out", str(p)], capsys)
    assert code == EXIT_OK
    assert len(json.loads(p.read_text())) == 5
    assert run(["lowerbound", "--family", "saddle", "--n", "30", "--algorithm", "smooth",
                "--iters", "29"], capsys)[0] == EXIT_OK


def bench_rows(path):
    rows = list(csv.DictReader(open(path)))
    for r in rows:
        r.pop("time_s")
    return rows


def test_bench_and_verify(tmp_path, capsys):
    d1, d2 = tmp_path / "a", tmp_path / "b"
    code, out, _ = run(["bench", "--suite", "sim", "--iters", "100", "--out-dir", str(d1), "--certify"], capsys)
    assert code == EXIT_OK
    assert "SIM32" in out
    run(["bench", "--suite", "sim", "--iters", "100", "--out-dir", str(d2)], capsys)
    assert bench_rows(d1 / "results_sim.csv") == bench_rows(d2 / "results_sim.csv")
    assert len(bench_rows(d1 / "results_sim.csv")) == 18
    code, out, _ = run(["verify", "--results", str(d1 / "results_sim.json"), "--check", "same-ballpark",
                        "--spread", "1e6"], capsys)
    assert code == EXIT_OK
    code, out, _ = run(["verify", "--results", str(d1 / "results_sim.json"), "--check", "pda-dominates",
                        "--factor", "1e-9"], capsys)
    assert code == EXIT_VIOLATION
    assert run(["verify", "--results", str(tmp_path / "none.json")], capsys)[0] == EXIT_CONFIG


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lcpkit.cli", "solve", "--iters", "3",
                          "--instance", PLANTED], capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0
    assert res.stdout.startswith("# effective-config: lcpkit solve")
    res = subprocess.run([sys.executable, "-m", "lcpkit.cli", "solve", "--nope"], capture_output=True,
                         text=True, cwd=tmp_path)
    assert res.returncode == EXIT_USAGE
