import csv
import io
import json
import math

import pytest

from qcond import cli
from qcond.errors import ConfigParseError


def write(tmp_path, cfg, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    return str(p)


FREE = {
    "model": "free_particle",
    "times": [0, 1, 2],
    "sets": [[0, 1], [0, 1], [0, 1]],
    "method": "formula",
    "numerics": {"rtol": 1e-6},
}
BOX = {
    "model": "weyl_chain",
    "events": [
        {"observable": "position", "set": [[0, 1]]},
        {"observable": "momentum", "set": [[0, 1]]},
        {"observable": "position", "set": [[0, 1]]},
        {"observable": "momentum", "set": [[0, 1]]},
    ],
    "split": 2,
    "method": "both",
    "numerics": {"grid_points": 512, "rtol": 1e-6},
}


def test_run_free_particle(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["run", write(tmp_path, FREE), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["paths"]["formula"]["probability"] == pytest.approx(0.156107135019737, rel=1e-5)
    assert "wall_time" not in report
    assert json.loads(capsys.readouterr().out) == report


def test_run_both_paths(tmp_path, capsys):
    assert cli.main(["run", write(tmp_path, BOX)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["within_tolerance"]
    assert report["paths"]["formula"]["probability"] == pytest.approx(0.02480955477069442, rel=1e-5)


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    path = write(tmp_path, dict(FREE, transforms={"kind": "galilei", "count": 3, "seed": 1}))
    cli.main(["run", path, "--out", str(a)])
    cli.main(["run", path, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_timing_flag(tmp_path, capsys):
    cli.main(["run", write(tmp_path, FREE), "--timing"])
    assert json.loads(capsys.readouterr().out)["wall_time"] > 0


def test_kg_and_finite_dim(tmp_path, capsys):
    kg = {"model": "kg_pairings", "field": {"model": "massless", "times": [0, 1, 2]}, "sets": [[0, 1]] * 3, "method": "both"}
    assert cli.main(["run", write(tmp_path, kg)]) == 0
    assert json.loads(capsys.readouterr().out)["within_tolerance"]
    fd = {
        "model": "finite_dim",
        "regions": [{"functionals": [f], "sets": [[0, 1]]} for f in ([1, 0], [0, 1], [1, 1])],
        "method": "formula",
    }
    assert cli.main(["run", write(tmp_path, fd)]) == 0
    assert json.loads(capsys.readouterr().out)["paths"]["formula"]["probability"] == pytest.approx(0.1536, rel=1e-3)


def test_sweep_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    cfg = dict(FREE, method="formula")
    assert cli.main(["sweep", write(tmp_path, cfg), "--axis", "set-width", "--values", "1,4,16", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    probs = [float(r["formula"]) for r in rows]
    assert probs[0] < probs[1] < probs[2] < 1
    assert capsys.readouterr().out.replace("\r\n", "\n") == out.read_text().replace("\r\n", "\n")


def test_sweep_transform_count(tmp_path, capsys):
    cfg = dict(FREE, transforms={"kind": "galilei", "seed": 3})
    assert cli.main(["sweep", write(tmp_path, cfg), "--axis", "transform-count", "--values", "4"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 4
    assert float(rows[-1]["max_deviation"]) < 1e-2


def test_sweep_time(tmp_path, capsys):
    cfg = dict(FREE, method="formula")
    assert cli.main(["sweep", write(tmp_path, cfg), "--axis", "time", "--values", "2,3", "--target", "2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [float(r["value"]) for r in rows] == [2, 3]


def test_check_passes(capsys):
    assert cli.main(["check"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(cli.bundled_scenarios())
    assert all(line.startswith("PASS") for line in lines)


def test_bad_json(tmp_path, capsys):
    assert cli.main(["run", write(tmp_path, '{"model": "free_particle",\n  "times": [0, 1,]}')]) == 2
    err = capsys.readouterr().err
    assert "ConfigParseError" in err and "line 2" in err


def test_load_config_location(tmp_path):
    with pytest.raises(ConfigParseError, match="line 3 column 3"):
        cli.load_config(write(tmp_path, "{\n\n  oops"))


@pytest.mark.parametrize(
    "patch",
    [
        {"model": "nope"},
        {"method": "guess"},
        {"sets": [[0, 1], [0, 1]]},
        {"numerics": {"grid_points": 1000}},
        {"numerics": {"rtol": -1}},
        {"split": 1},
        {"hbar": 0},
    ],
)
def test_invalid_config(tmp_path, patch):
    assert cli.main(["run", write(tmp_path, dict(FREE, **patch))]) == 2


def test_missing_file(tmp_path):
    assert cli.main(["run", str(tmp_path / "none.json")]) == 2


def test_degenerate_exit_code(tmp_path):
    cfg = {"model": "kg_pairings", "pairings": {"e12": 1, "e13": 1, "e23": 0}, "sets": [[0, 1]] * 3, "method": "formula"}
    assert cli.main(["run", write(tmp_path, cfg)]) == 4


def test_quadrature_exit_code(tmp_path):
    cfg = dict(FREE, numerics={"rtol": 1e-10, "budget": 50})
    assert cli.main(["run", write(tmp_path, cfg)]) == 3


def test_oscillator_caustic(tmp_path):
    cfg = dict(FREE, model="oscillator", times=[0, math.pi, 4])
    assert cli.main(["run", write(tmp_path, cfg)]) == 4
