import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from fracgrad.cli import EXIT_INVALID, EXIT_OK, main, parse_config, read_config_file, ConfigError


def run(tmp_path, *args):
    out = tmp_path / "out"
    code = main(list(args) + ["--out-dir", str(out)])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


def test_solve_monotone_example(tmp_path):
    code, out = run(tmp_path, "solve", "--s", "0.75", "--p", "1.2", "--f", "const:1", "--scheme", "monotone", "--n-grid", "400")
    assert code == EXIT_OK
    rep = report(out)
    assert rep["result"]["converged"] is True
    assert rep["schema"] == "fracgrad/report"
    assert rep["exponents"]["grad_blowup"] == pytest.approx(4.0)
    assert max(rep["result"]["final"]) == pytest.approx(0.2052805404, rel=1e-9)
    rows = list(csv.reader(open(out / "history.csv")))
    assert rows[0] == ["iter", "residual", "ball_norm", "violation"]
    assert (out / "solution.csv").read_text().startswith("x,u,f\n")
    assert "converged: True" in (out / "summary.txt").read_text()


def test_scan_example(tmp_path):
    code, out = run(
        tmp_path, "scan", "--kind", "grad-integrability", "--s", "0.75", "--a", "2,3,3.5,4.5,6", "--refinements", "200,400,800,1600"
    )
    assert code == EXIT_OK
    res = report(out)["result"]
    assert res["threshold"] == pytest.approx(4.0)
    assert res["monotone_verdicts"] is True
    assert (out / "scan.csv").exists()


def test_invalid_order(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", "--s", "1.2")
    assert code == EXIT_INVALID
    assert "(1/2, 1)" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        ["solve", "--scheme", "monotone", "--p", "1.6"],
        ["solve", "--scheme", "fixed-point", "--s", "0.8", "--p", "4"],
        ["solve", "--scheme", "monotone"],
        ["solve", "--scheme", "nope"],
        ["solve", "--n-grid", "2"],
        ["solve", "--f", "magic:1"],
        ["scan", "--kind", "sobolev"],
        ["dirac", "--p", "2", "--eps", "0.1,0.2"],
        ["compare", "--f1", "const:1"],
        ["solve", "--bogus", "1"],
    ],
)
def test_rejected_before_work(tmp_path, args):
    code, out = run(tmp_path, *args)
    assert code == EXIT_INVALID
    assert not (out / "report.json").exists()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# pilot\ns = 0.8\nn = 50   # alias of n_grid\nf = const:2\n")
    c = parse_config(["solve", "--config", str(cfg), "--s", "0.7"])
    assert c["s"] == 0.7 and c["n_grid"] == 50 and c["f"] == "const:2"


def test_config_unknown_key_names_line(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("s = 0.8\n\nsigma = 2\n")
    with pytest.raises(ConfigError, match=r":3: unknown key 'sigma'"):
        read_config_file(cfg)
    code, _ = run(tmp_path, "solve", "--config", str(cfg))
    assert code == EXIT_INVALID
    assert ":3:" in capsys.readouterr().err


def test_config_malformed_and_unreadable(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("s 0.8\n")
    assert run(tmp_path, "solve", "--config", str(cfg))[0] == EXIT_INVALID
    cfg.write_text("n_grid = 1.5\n")
    assert run(tmp_path, "solve", "--config", str(cfg))[0] == EXIT_INVALID
    assert run(tmp_path, "solve", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_INVALID


def test_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("OUT_DIR", str(tmp_path / "env"))
    assert main(["solve", "--n-grid", "20"]) == EXIT_OK
    assert (tmp_path / "env" / "report.json").exists()


def test_determinism(tmp_path):
    args = ["solve", "--s", "0.75", "--p", "1.2", "--scheme", "monotone", "--n-grid", "100", "--out-dir", str(tmp_path)]
    assert main(args) == EXIT_OK
    first = (tmp_path / "report.json").read_text().splitlines()
    assert main(args) == EXIT_OK
    second = (tmp_path / "report.json").read_text().splitlines()
    assert '"timestamp"' in first[1]
    assert first[2:] == second[2:]


def test_source_date_epoch(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    _, out = run(tmp_path, "solve", "--n-grid", "20")
    assert report(out)["timestamp"] == "1970-01-01T00:00:00Z"


@pytest.mark.parametrize(
    "f1,f2,scheme",
    [("const:1", "const:2", "linear"), ("const:1", "const:2", "monotone"), ("const:0", "bump:0,0.3", "monotone")],
)
def test_compare_pass(tmp_path, f1, f2, scheme):
    code, out = run(tmp_path, "compare", "--f1", f1, "--f2", f2, "--scheme", scheme, "--p", "1.2", "--n-grid", "100")
    assert code == EXIT_OK
    res = report(out)["result"]
    assert res["pass"] and res["u2_nonnegative"]
    if f1 == "const:0":
        rows = list(csv.DictReader(open(out / "compare.csv")))
        assert all(float(r["u1"]) == 0 for r in rows)


def test_compare_identical_is_exact(tmp_path):
    code, out = run(tmp_path, "compare", "--f1", "bump:0.2,0.4", "--f2", "bump:0.2,0.4", "--scheme", "monotone", "--p", "1.3", "--n-grid", "80")
    assert code == EXIT_OK
    assert report(out)["result"]["worst_violation"] == 0.0


def test_compare_unordered(tmp_path):
    assert run(tmp_path, "compare", "--f1", "const:2", "--f2", "const:1")[0] == EXIT_INVALID


@pytest.mark.parametrize("scheme,extra", [
    ("linear", []),
    ("newton", ["--p", "1.5"]),
    ("regularized", ["--p", "1.2", "--f", "const:5"]),
    ("fixed-point", ["--s", "0.8", "--p", "2", "--m", "10"]),
    ("reaction", ["--p", "1.3", "--g", "const:1", "--lambda", "0.2"]),
])
def test_every_scheme_runs(tmp_path, scheme, extra):
    code, out = run(tmp_path, "solve", "--scheme", scheme, "--n-grid", "60", *extra)
    assert code == EXIT_OK
    assert report(out)["result"]["scheme"] == scheme


def test_other_subcommands(tmp_path):
    code, out = run(tmp_path, "validate-operator", "--s", "0.6", "--n-grid", "400", "--dump-matrix", "A.bin")
    assert code == EXIT_OK
    res = report(out)["result"]
    assert res["max_oracle_error"] < 0.01 and (out / "A.bin").exists()
    code, out = run(tmp_path, "dirac", "--p", "3", "--n-grid", "800")
    assert code == EXIT_OK and report(out)["result"]["kind"] == "dirac"
    assert "linear problem" in (out / "summary.txt").read_text()
    code, out = run(tmp_path, "nonexist", "--values", "2,4,5", "--refinements", "200,400,800,1600")
    assert code == EXIT_OK
    assert report(out)["result"]["verdicts"] == ["converging", "diverging", "diverging"]
    for kind, vals in (("hardy", "0.3,1"), ("sobolev", "2,4"), ("nonexist", "2")):
        assert run(tmp_path, "scan", "--kind", kind, "--values", vals, "--refinements", "100,200,400")[0] == EXIT_OK


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fracgrad", "solve", "--n-grid", "10", "--out-dir", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "fracgrad", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 2


CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize(
    "sub,name,check",
    [
        ("solve", "solve_monotone.cfg", lambda r: max(r["final"]) == pytest.approx(0.2052805404, rel=1e-9)),
        ("solve", "solve_regularized.cfg", lambda r: max(r["final"]) == pytest.approx(1.0070138882549329, rel=1e-8)),
        ("scan", "scan_gradient.cfg", lambda r: r["threshold"] == 4.0),
        ("nonexist", "nonexist.cfg", lambda r: r["limit_estimate"][0] == pytest.approx(4.00038, abs=1e-5)),
    ],
)
def test_tracked_configs_reproduce(tmp_path, sub, name, check):
    code, out = run(tmp_path, sub, "--config", str(CONFIGS / name))
    assert code == EXIT_OK
    assert check(report(out)["result"])
