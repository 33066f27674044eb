import json
import math

import numpy as np
import pytest

from horseshoe import cli
from horseshoe.serialization import dumps, rows_to_csv


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rational_parsing():
    assert cli.rational("1/16") == 0.0625
    assert cli.rational_list("1/16,1/8, 0.125") == [0.0625, 0.125, 0.125]


def test_bowen_command(capsys):
    code, out, _ = run(capsys, "bowen", "--lengths", "1/16,1/8,1/8", "--total", "65/96")
    assert code == 0
    assert json.loads(out)["kappa"] == pytest.approx(0.58096155, abs=1e-8)


def test_bowen_config_error(capsys):
    code, _, err = run(capsys, "bowen", "--lengths", "1/2,1/2", "--total", "1/2")
    assert code == 2
    assert "config" in err


def test_guard_exit_code(capsys):
    code, _, err = run(capsys, "tangency-circle", "--k", "10")
    assert code == 2
    assert "parameter" in err


def test_numerical_failure_exit_code(capsys):
    code, _, err = run(capsys, "critical", "--k", "0.1")
    assert code == 3
    assert "critical" in err


def test_fixed_points_csv(capsys):
    code, out, _ = run(capsys, "fixed-points", "--k", "100", "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0
    assert lines[0] == "x,y,branch,stability,residual"
    assert len(lines) == 401


def test_critical_json(capsys):
    _, out, _ = run(capsys, "critical", "--k", "400")
    d = json.loads(out)
    assert (d["nu_plus"] - 0.25) * 2 * math.pi**2 * 400 == pytest.approx(1.0, abs=0.01)


def test_output_file(tmp_path, capsys):
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "critical", "--k", "100", "--output", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["k"] == 100.0


def test_portrait_reproducible(capsys):
    _, a, _ = run(capsys, "portrait", "--k", "1", "--orbits", "3", "--iterations", "5", "--seed", "7", "--format", "csv")
    _, b, _ = run(capsys, "portrait", "--k", "1", "--orbits", "3", "--iterations", "5", "--seed", "7", "--format", "csv")
    assert a == b
    assert len(a.strip().splitlines()) == 1 + 3 * 6


def test_sweep_sorted_by_k(capsys):
    _, out, _ = run(capsys, "sweep", "--ks", "400,100", "critical")
    ks = [r["k"] for r in json.loads(out)["results"]]
    assert ks == [100.0, 400.0]


def test_tolerance_validated():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["critical", "--k", "100", "--tol", "0.5"])


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for name in ("find-tangency", "verify", "partition", "sweep"):
        assert name in text


def test_serialization_handles_numpy_and_nan():
    d = json.loads(dumps({"a": np.float64(1.5), "b": np.arange(2), "c": float("nan"), "d": (1, 2)}))
    assert d == {"a": 1.5, "b": [0, 1], "c": "nan", "d": [1, 2]}
    assert rows_to_csv(["x", "y"], [(1, 2.5)]) == "x,y\n1,2.5\n"
