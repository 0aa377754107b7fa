import csv
import io
import json

import numpy as np
import pytest

from shotnoise.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, UsageError, main, parse_grid, render


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "text,expected",
    [
        ("0:1:0.25", [0, 0.25, 0.5, 0.75, 1.0]),
        ("-2:4:2", [-2, 0, 2, 4]),
        ("0:1:0.3", [0, 0.3, 0.6, 0.9]),
        ("1,2.5,-3", [1, 2.5, -3]),
        ("7", [7]),
    ],
)
def test_parse_grid(text, expected):
    np.testing.assert_allclose(parse_grid(text), expected)


@pytest.mark.parametrize("text", ["", "3:1:1", "0:1:0", "0:1", "a,b", "1:2:x"])
def test_parse_grid_rejects(text):
    with pytest.raises(UsageError):
        parse_grid(text)


def test_density_csv(capsys):
    code, out, _ = run(capsys, "density", "--r", "2", "--k", "0,2", "--y", "-1:1:1")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["y", "edgeworth_k0", "edgeworth_k2", "valid_k0", "valid_k2"]
    assert len(rows) == 4
    assert float(rows[2][1]) == pytest.approx(1 / np.sqrt(2 * np.pi), rel=1e-16)


def test_density_with_oracle_columns(capsys):
    code, out, _ = run(capsys, "density", "--r", "2", "--k", "4", "--y", "0", "--oracle")
    assert code == EXIT_OK
    header, row = list(csv.reader(io.StringIO(out)))
    assert header == ["y", "edgeworth_k4", "oracle", "rel_error_k4", "valid_k4"]
    assert float(row[3]) < 1e-5


def test_csv_and_json_agree(capsys):
    _, out_csv, _ = run(capsys, "density", "--r", "3", "--k", "2", "--y", "-2,0.5,3")
    _, out_json, _ = run(capsys, "density", "--r", "3", "--k", "2", "--y", "-2,0.5,3", "--format", "json")
    rows = list(csv.reader(io.StringIO(out_csv)))[1:]
    doc = json.loads(out_json)
    assert doc["columns"][:2] == ["y", "edgeworth_k2"]
    for a, b in zip(rows, doc["rows"]):
        assert float(a[1]) == b[1]
    assert doc["meta"]["command"] == "density"


def test_sbar_grid(capsys):
    code, out, _ = run(capsys, "density", "--r", "2", "--sbar", "0.75")
    assert code == EXIT_OK
    assert float(list(csv.reader(io.StringIO(out)))[1][0]) == 0.0


def test_support_error_exit_code(capsys):
    code, out, err = run(capsys, "density", "--r", "2", "--y", "-7")
    assert code == EXIT_USAGE
    assert "y=-7" in err and "r=2" in err and out == ""


def test_bad_gamma(capsys):
    code, _, err = run(capsys, "density", "--gamma", "1.5", "--r", "2", "--y", "0")
    assert code == EXIT_USAGE


def test_unknown_option(capsys):
    assert run(capsys, "density", "--bogus")[0] == EXIT_USAGE


def test_numeric_failure_exit_code(capsys, monkeypatch):
    from shotnoise import cli
    from shotnoise.tilt import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("no root")

    monkeypatch.setattr(cli, "density_Y", boom)
    code, _, err = run(capsys, "density", "--r", "2", "--y", "1")
    assert code == EXIT_NUMERIC and "no root" in err


def test_tilt_columns(capsys):
    code, out, _ = run(capsys, "tilt", "--r", "2", "--y", "0", "--n-max", "4")
    header, row = list(csv.reader(io.StringIO(out)))
    assert header == ["y", "xi", "xi_over_rho", "kappa2", "kappa3", "kappa4", "log_prefactor"]
    assert float(row[3]) == 1.0


@pytest.mark.parametrize(
    "argv",
    [
        ("simulate", "sbar", "--r", "1.5", "--draws", "500", "--seed", "3"),
        ("simulate", "gibbs", "--n", "16", "--s", "10", "--draws", "40", "--sweeps", "5", "--seed", "4"),
    ],
)
def test_mc_commands_deterministic(capsys, monkeypatch, argv):
    first = run(capsys, *argv)[1]
    monkeypatch.setenv("SHOTNOISE_THREADS", "4")
    second = run(capsys, *argv)[1]
    assert first == second and first
    other = run(capsys, *argv[:-1], "99")[1]
    assert other != first


def test_threads_do_not_change_output(capsys, monkeypatch):
    argv = ("density", "--r", "2", "--k", "2", "--y", "-3:3:0.5")
    one = run(capsys, *argv)[1]
    monkeypatch.setenv("SHOTNOISE_THREADS", "3")
    assert run(capsys, *argv)[1] == one


def test_bad_thread_setting(capsys, monkeypatch):
    monkeypatch.setenv("SHOTNOISE_THREADS", "many")
    assert run(capsys, "density", "--r", "2", "--y", "0,1")[0] == EXIT_USAGE


def test_output_file(tmp_path, capsys):
    path = tmp_path / "t.json"
    assert main(["tilt", "--r", "2", "--y", "1", "--format", "json", "-o", str(path)]) == EXIT_OK
    assert json.loads(path.read_text())["columns"][0] == "y"


def test_validate_subset(capsys):
    code, out, _ = run(capsys, "validate", "--only", "tilt,edgeworth")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert {r[0] for r in rows} == {"tilt", "edgeworth"}
    assert all(r[2] == "1" for r in rows)


def test_validate_unknown_module(capsys):
    assert run(capsys, "validate", "--only", "nothing")[0] == EXIT_USAGE


def test_render_formats_seventeen_digits():
    text = render({}, ["x"], [[0.1]], "csv")
    assert text == "x\n0.10000000000000001\n"
