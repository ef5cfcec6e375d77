import csv
import json
import pathlib
import subprocess
import sys

import pytest

from qnpu_lab.cli import apply_thread_cap, fmt, main, RunFailure, THREAD_VARS

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"
FAST = {
    "scan-cost": "scan-cost",
    "solve-gpe": "solve-gpe",
    "fit-fidelity": "fit-fidelity-quick",
    "mps-compile": "mps-compile",
    "sampling-analysis": "sampling-analysis",
    "burgers-evolve": "burgers-evolve",
}


@pytest.fixture(autouse=True)
def _no_thread_cap(monkeypatch):
    monkeypatch.delenv("QNPU_LAB_THREADS", raising=False)


def run(exp, out, *extra, config=None):
    return main([exp, "--config", str(config or CONFIGS / f"{FAST[exp]}.cfg"), "--out", str(out), *extra])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fmt_round_trips_doubles():
    for v in (0.1, 1 / 3, -2.5e-300, 12345678.987654321):
        assert float(fmt(v)) == v
    assert fmt(3) == "3" and fmt(True) == "true"


@pytest.mark.parametrize("exp", sorted(FAST))
def test_experiment_outputs(exp, tmp_path):
    assert run(exp, tmp_path) == 0
    raw = (tmp_path / f"{exp}.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = read_csv(tmp_path / f"{exp}.csv")
    assert len(rows) > 1 and all(len(r) == len(rows[0]) for r in rows)
    man = json.loads((tmp_path / f"{exp}.manifest.json").read_text())
    for key in ("config", "resolved_config", "seed", "versions", "wall_time_s", "summary"):
        assert key in man
    assert man["rows"] == len(rows) - 1
    assert {"python", "numpy", "scipy"} <= set(man["versions"])


def test_scan_cost_columns_and_minimum(tmp_path):
    assert run("scan-cost", tmp_path) == 0
    rows = read_csv(tmp_path / "scan-cost.csv")
    assert rows[0] == ["lambda", "K", "P", "I", "total"]
    body = [[float(v) for v in r] for r in rows[1:]]
    assert len(body) == 63
    for lam, K, P, I, total in body:
        assert total == pytest.approx(K + P + I)
    best = min(body, key=lambda r: r[4])
    assert best[0] == pytest.approx(3.3)


def test_floats_written_with_17_digits(tmp_path):
    assert run("scan-cost", tmp_path) == 0
    rows = read_csv(tmp_path / "scan-cost.csv")
    # irrational energies need all 17 significant digits to round-trip
    digits = [len(v.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) for v in rows[5][1:]]
    assert max(digits) == 17


@pytest.mark.parametrize("exp", sorted(FAST))
def test_rerun_is_byte_identical(exp, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(exp, a) == 0 and run(exp, b) == 0
    assert (a / f"{exp}.csv").read_bytes() == (b / f"{exp}.csv").read_bytes()


def test_seed_override(tmp_path):
    assert run("sampling-analysis", tmp_path / "a", "--seed", "5") == 0
    assert run("sampling-analysis", tmp_path / "b", "--seed", "6") == 0
    a = (tmp_path / "a" / "sampling-analysis.csv").read_bytes()
    assert a != (tmp_path / "b" / "sampling-analysis.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "sampling-analysis.manifest.json").read_text())["seed"] == 5


def test_missing_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("grid.n = 2\npotential.kind = harmonic\npotential.strength = 2000\n")
    assert run("scan-cost", tmp_path, config=cfg) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and "'g'" in err["message"]
    assert err["line"] == 4 and err["column"] == 1
    assert not (tmp_path / "scan-cost.csv").exists()


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as ex:
        main(["scan-cost"])
    assert ex.value.code == 2
    with pytest.raises(SystemExit) as ex:
        main(["scan-cost", "--config", "x", "--seed", str(2**64)])
    assert ex.value.code == 2
    assert run("scan-cost", tmp_path, config=tmp_path / "nope.cfg") == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    cfg = tmp_path / "unstable.cfg"
    cfg.write_text("grid.n = 3\nburgers.nu = 1\nburgers.tau = 1\nburgers.steps = 2\n")
    assert run("burgers-evolve", tmp_path, config=cfg) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "PreconditionError"


def test_thread_cap(monkeypatch, tmp_path):
    env = {"QNPU_LAB_THREADS": "3"}
    assert apply_thread_cap(env) == 3
    assert all(env[v] == "3" for v in THREAD_VARS)
    assert apply_thread_cap({}) is None
    for bad in ("0", "-2", "many"):
        with pytest.raises(RunFailure):
            apply_thread_cap({"QNPU_LAB_THREADS": bad})
    monkeypatch.setenv("QNPU_LAB_THREADS", "zero")
    assert run("scan-cost", tmp_path) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qnpu_lab.cli", "mps-compile", "--config", str(CONFIGS / "mps-compile.cfg"),
         "--out", str(tmp_path)],
        env={"QNPU_LAB_THREADS": "1", "PATH": "/usr/bin:/bin"}, capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    man = json.loads((tmp_path / "mps-compile.manifest.json").read_text())
    assert man["threads"] == 1
