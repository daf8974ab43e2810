import subprocess
import sys

import numpy as np
import pytest

from helpers import CLASSIC, PORTED
from portpmp.bench import CheapestStopParams, analytic_classic, classic_file, ported_file
from portpmp.cli import format_csv, main, parse_range
from portpmp.model import load_problem


@pytest.fixture
def classic(tmp_path):
    path = tmp_path / "classic.ocp"
    path.write_text(classic_file(CLASSIC))
    return path


@pytest.fixture
def ported(tmp_path):
    path = tmp_path / "ported.ocp"
    path.write_text(ported_file(PORTED))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    values = {"true": 1.0, "false": 0.0}
    rows = [[values[v] if v in values else float(v) for v in ln.split(",")] for ln in lines[1:]]
    return lines[0].split(","), np.array(rows)


def run(argv, tmp_path):
    return main([*map(str, argv), "--out", str(tmp_path)])


def test_solve_writes_trajectory(classic, tmp_path, capsys):
    assert run(["solve", classic, "--steps", "200"], tmp_path) == 0
    header, data = read_csv(tmp_path / "classic.trajectory.csv")
    assert header == ["t", "x1", "x2", "lambda1", "lambda2", "u1", "y", "I"]
    assert data.shape == (201, 8)
    assert np.max(np.abs(data[:, 5] - (-6 * data[:, 0] + 2))) < 1e-6
    out = capsys.readouterr().out
    assert "status: converged" in out and "nu class: normal" in out
    assert (tmp_path / "classic.report.txt").read_text().startswith("command: portpmp solve")


def test_ported_trajectory_has_port_columns(ported, tmp_path):
    assert run(["solve", ported, "--steps", "100"], tmp_path) == 0
    header, data = read_csv(tmp_path / "ported.trajectory.csv")
    assert header == ["t", "x1", "x2", "lambda1", "lambda2", "u1", "f1", "fprime1", "e1", "eprime1", "y", "I"]
    assert np.allclose(data[:, 6], 0.1 * data[:, 0], rtol=0, atol=1e-15)
    assert np.all(data[:, 7] == 0.1)


def test_missing_file(tmp_path, capsys):
    assert run(["solve", tmp_path / "nope.ocp"], tmp_path) == 1
    assert "cannot read" in capsys.readouterr().err


def test_bad_flags_exit_one(classic, tmp_path, capsys):
    assert run(["solve", classic, "--steps", "0"], tmp_path) == 1
    with pytest.raises(SystemExit) as err:
        main(["solve", str(classic), "--nu", "sometimes"])
    assert err.value.code == 1


def test_unreachable_target_exits_two(tmp_path, capsys):
    # the box |u| <= 0.1 cannot bring the cart to rest at x1 in time
    path = tmp_path / "box.ocp"
    path.write_text(classic_file(CLASSIC).replace("-inf inf", "-0.1 0.1"))
    assert run(["solve", path, "--steps", "50"], tmp_path) == 2
    assert "status: solver failed" in capsys.readouterr().out
    assert not (tmp_path / "box.trajectory.csv").exists()
    assert (tmp_path / "box.report.txt").exists()


def test_solve_is_deterministic(classic, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["solve", classic], a) == 0
    assert run(["solve", classic], b) == 0
    assert (a / "classic.trajectory.csv").read_bytes() == (b / "classic.trajectory.csv").read_bytes()


def test_seed_lambda_flag(classic, tmp_path, capsys):
    assert run(["solve", classic, "--seed-lambda", "12,4"], tmp_path) == 0
    assert run(["solve", classic, "--seed-lambda", "1,2,3"], tmp_path) == 1
    assert "needs 2 components" in capsys.readouterr().err


def test_abnormal_request_is_rejected(classic, tmp_path, capsys):
    assert run(["solve", classic, "--nu", "abnormal"], tmp_path) == 2
    out = capsys.readouterr().out
    assert "abnormal" in out and "rejected" in out


def test_compare_pass(ported, tmp_path, capsys):
    assert run(["compare", ported], tmp_path) == 0
    text = (tmp_path / "ported.compare.txt").read_text()
    assert "status: compare pass" in text
    assert "status: compare pass" in capsys.readouterr().out


def test_compare_zero_tolerance_fails(classic, tmp_path):
    assert run(["compare", classic, "--intervals", "10", "--tol-rel", "0"], tmp_path) == 2
    assert "compare fail" in (tmp_path / "classic.compare.txt").read_text()


def test_compare_zero_motion(tmp_path):
    path = tmp_path / "rest.ocp"
    path.write_text(classic_file(CheapestStopParams(x0=0.5, v0=0.0, x1=0.5)))
    assert run(["compare", path, "--intervals", "10"], tmp_path) == 0


def test_compare_bad_intervals(classic, tmp_path):
    assert run(["compare", classic, "--intervals", "1"], tmp_path) == 1


def test_sweep_horizon(classic, tmp_path):
    assert run(["sweep", classic, "t1", "0.5,1,2"], tmp_path) == 0
    header, data = read_csv(tmp_path / "classic.sweep.csv")
    assert header == ["t1", "J", "nu", "converged"]
    expected = [analytic_classic(CheapestStopParams(t1=v))[2] for v in (0.5, 1, 2)]
    assert np.allclose(data[:, 1], expected, rtol=1e-6)
    assert np.all(np.diff(data[:, 1]) < 0)
    assert (tmp_path / "classic.sweep.csv").read_text().splitlines()[1].endswith(",true")


def test_sweep_marks_failed_rows(classic, tmp_path):
    assert run(["sweep", classic, "t1", "0,1"], tmp_path) == 0
    rows = (tmp_path / "classic.sweep.csv").read_text().splitlines()
    assert rows[1] == "0,nan,nan,false"
    assert rows[2].endswith(",true")


def test_sweep_empty_range(classic, tmp_path):
    assert run(["sweep", classic, "terminal.x1", ""], tmp_path) == 0
    assert (tmp_path / "classic.sweep.csv").read_text() == "terminal.x1,J,nu,converged\n"


def test_sweep_unknown_parameter(classic, tmp_path, capsys):
    assert run(["sweep", classic, "mass", "1,2"], tmp_path) == 1
    assert "unknown parameter" in capsys.readouterr().err


def test_validate(classic, tmp_path, capsys):
    assert main(["validate", str(classic)]) == 0
    bad = tmp_path / "bad.ocp"
    bad.write_text(classic_file(CLASSIC).replace("t1 = 1", "t1 = -1"))
    assert main(["validate", str(bad)]) == 1
    assert "t1" in capsys.readouterr().err


def test_parse_range():
    assert parse_range("1,2.5") == [1.0, 2.5]
    assert parse_range("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_range(" ") == []


def test_format_csv():
    assert format_csv(["a", "b"], [(0.1, "true")]) == "a,b\n0.10000000000000001,true\n"


def test_files_load_back(classic, ported):
    assert load_problem(classic.read_text()).n == load_problem(ported.read_text()).n == 2


def test_module_entry_point(classic, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "portpmp", "solve", str(classic), "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "J = " in proc.stdout
