import os
import subprocess
import sys

import numpy as np
import pytest

from cvmd.harness import checks
from cvmd.harness.case1 import BUDGET_COLUMNS, SERIES_COLUMNS
from cvmd.harness.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main
from cvmd.harness.io import read_csv, write_csv
from cvmd.pressure import MOP_COLUMNS, VA_COLUMNS

CASE1 = """density = 0.8
n = 256
dt = 0.005
steps = 60
seed = 2
cv_side = 1.71
mass_grid = 4
output_every = 20
"""
CASE2 = """density = 0.8
n = 256
steps = 200
seed = 2
output_every = 20
block_length = 50
"""
CASE3 = """lattice_cells = 6
wall_layers = 2
grid = 12
ensemble = 2
equilibration_steps = 40
profile_times = 0.5
profile_window = 0.2
stress_time = 0.5
stress_window = 0.2
stress_blocks = 2
balance_window = 20
steps = 0
"""


def _run(tmp_path, case, text):
    cfg = tmp_path / f"{case}.cfg"
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([case, "--config", str(cfg), "--out", str(out), "-q"]), out


def test_case1_cli(tmp_path):
    code, out = _run(tmp_path, "case1", CASE1)
    assert code == EXIT_OK
    head, rows = read_csv(out / "case1_series.csv")
    assert tuple(head) == SERIES_COLUMNS and len(rows) == 59
    head, rows = read_csv(out / "case1_budget.csv")
    assert tuple(head) == BUDGET_COLUMNS and len(rows) == 5 * 4**3
    head, _ = read_csv(out / "case1_windows.csv")
    assert tuple(head) == ("window", "t0", "t1") + BUDGET_COLUMNS
    report = (out / "case1_report.txt").read_text()
    assert "mass_violations_box = 0" in report


def test_case2_cli(tmp_path, capsys):
    code, out = _run(tmp_path, "case2", CASE2)
    assert code == EXIT_OK
    assert "PD(Pi)" in capsys.readouterr().out
    head, rows = read_csv(out / "case2_series.csv")
    assert head[0] == "step" and len(rows) == 10
    assert (out / "case2_intervals.csv").is_file()


def test_case3_cli(tmp_path):
    code, out = _run(tmp_path, "case3", CASE3)
    assert code == EXIT_OK
    head, rows = read_csv(out / "case3_va_cells.csv")
    assert tuple(head) == VA_COLUMNS and len(rows) == 12
    v = np.array(rows, dtype=float)
    np.testing.assert_allclose(v[:, 3:12], v[:, 12:21] + v[:, 21:30], rtol=1e-12, atol=1e-12)
    head, rows = read_csv(out / "case3_mop_faces.csv")
    assert tuple(head) == MOP_COLUMNS and len(rows) == 12 * 6
    for name in ("velocity", "stress", "balance", "balance_seed1", "balance_seed2"):
        assert (out / f"case3_{name}.csv").is_file()


def test_check_cli_failure_exit(monkeypatch):
    monkeypatch.setattr(checks, "run_check", lambda cfg: [checks.CheckResult("x", False, 1.0, 0.0)])
    assert main(["check"]) == EXIT_INVARIANT


def test_config_errors(tmp_path, capsys):
    assert main(["case1"]) == EXIT_CONFIG
    assert main(["case1", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("dt = fast\n")
    assert main(["case2", "--config", str(bad)]) == EXIT_CONFIG
    bad.write_text("density = 0.8\nn = 256\ncv_side = 1.3\n")
    assert main(["case1", "--config", str(bad)]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_csv_roundtrip_exact(tmp_path, rng):
    x = rng.normal(size=(20, 3)) * 10.0 ** rng.integers(-12, 12, size=(20, 3))
    rows = [(i, *map(float, r)) for i, r in enumerate(x)]
    p = write_csv(tmp_path / "a.csv", ("i", "a", "b", "c"), rows)
    head, back = read_csv(p)
    assert head == ["i", "a", "b", "c"]
    assert np.array_equal(np.array(back, dtype=float)[:, 1:], x)
    with pytest.raises(ValueError):
        write_csv(tmp_path / "b.csv", ("a",), [(1, 2)])


@pytest.mark.parametrize("flag,expected", [("1", "python"), ("", None)])
def test_backend_selection(flag, expected):
    env = dict(os.environ, CVMD_PURE_PYTHON=flag)
    out = subprocess.run([sys.executable, "-c", "import cvmd._backend as b; print(b.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    if expected is None:
        assert out in ("compiled", "python")
    else:
        assert out == expected
