import csv
import json
import math

import pytest

from gradfront import pipeline
from gradfront.cli import main
from gradfront.errors import SchemaError
from gradfront.scenario import SCHEMA, Scenario, load_scenario, parse_scenario, render

MINIMAL = """\
growth.A = 0.25
B = 1
initial.tail.kind = compact
"""

TINY = """\
name = tiny
B = 0
growth.A = {A}
initial.tail.kind = compact
initial.tail.support_hi = 2
solver.X_lo = -6
solver.X_hi = 6
solver.hX = 0.25
solver.Y_half_width = 9
solver.hY = 0.25
solver.dt = 0.05
solver.t_end = 4
solver.output_stride = 2
analysis.eig_h = 0.02
"""

TINY_ALGEBRAIC = """\
name = tiny_alg
B = 1
growth.A = 0.25
initial.tail.kind = algebraic
initial.tail.a = 2
solver.X_lo = -10
solver.X_hi = 150
solver.hX = 1.0
solver.Y_half_width = 9
solver.hY = 0.5
solver.dt = 0.1
solver.t_end = 6
solver.output_stride = 5
analysis.eig_h = 0.02
analysis.mu = 0.05
"""


# -- parsing

def test_minimal_document_fills_defaults():
    sc = parse_scenario(MINIMAL)
    assert sc.growth_A == 0.25 and sc.B == 1.0 and sc.initial_tail_kind == "compact"
    assert sc.solver_Y_half_width == SCHEMA["solver.Y_half_width"][1]
    assert sc.analysis_mu == (0.05,) and sc.analysis_eps_fraction == 0.25


def test_negative_A_is_rejected_with_line():
    with pytest.raises(SchemaError) as exc:
        parse_scenario("growth.A = -1\n")
    assert exc.value.errors == [(1, "A must be positive")]
    assert "A must be positive" in str(exc.value)


def test_schema_errors_collect_every_line():
    doc = "# comment\nfoo = 1\nB = abc\nB = 2\nsolver.output_stride = 0\n"
    with pytest.raises(SchemaError) as exc:
        parse_scenario(doc)
    lines = [ln for ln, _ in exc.value.errors]
    assert lines == [2, 3]
    with pytest.raises(SchemaError) as exc:
        parse_scenario("B = 1\nB = 2\n")
    assert "duplicate" in exc.value.errors[0][1]
    with pytest.raises(SchemaError) as exc:
        parse_scenario("solver.output_stride = 0\n")
    assert exc.value.errors[0][0] == 1
    with pytest.raises(SchemaError):
        parse_scenario("analysis.mu = 0.1, -0.2\n")
    with pytest.raises(SchemaError):
        parse_scenario("just text\n")


def test_example_two_document_uses_tail_constant():
    sc = parse_scenario("initial.tail.kind = algebraic\ninitial.tail.a = 2\ninitial.tail.C = 1.5\n")
    assert sc.envelope_Gamma == 1.5 and sc.envelope_gamma == 1.5
    sc = sc.with_values(**{"analysis.Gamma": 3.0})
    assert sc.envelope_Gamma == 3.0 and sc.envelope_gamma == 1.5


def test_round_trip_and_copy():
    sc = parse_scenario(TINY_ALGEBRAIC)
    assert parse_scenario(render(sc)) == sc
    assert parse_scenario(render(Scenario())) == Scenario()
    other = sc.with_values(**{"growth.A": 1.0})
    assert other.growth_A == 1.0 and sc.growth_A == 0.25
    with pytest.raises(SchemaError):
        sc.with_values(**{"growth.A": -2.0})


def test_shipped_scenarios_parse():
    from pathlib import Path
    files = sorted((Path(__file__).parents[1] / "scenarios").glob("*.txt"))
    assert len(files) == 6
    for f in files:
        sc = load_scenario(f)
        assert parse_scenario(render(sc)) == sc


# -- pipeline and CLI

def _write(tmp_path, text, name="sc.txt"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_run_writes_artifacts(tmp_path, capsys):
    cfg = _write(tmp_path, TINY.format(A=4.0))
    out = tmp_path / "run"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    for name in ("eigen.csv", "mass.csv", "level_sets.csv", "regime.json", "summary.json",
                 "front.svg", "log_front.svg", "mass_profiles.svg", "scenario.txt"):
        assert (out / name).is_file(), name
    s = json.loads((out / "summary.json").read_text())
    assert s["classification"] == "extinct"
    assert s["lambda0"] == pytest.approx(1.0, abs=1e-3)
    assert parse_scenario((out / "scenario.txt").read_text()) == parse_scenario(TINY.format(A=4.0))
    # analyze re-reads the CSVs and reproduces the summary
    first = (out / "summary.json").read_bytes()
    assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "summary.json").read_bytes() == first


def test_cli_eig_and_simulate(tmp_path, capsys):
    cfg = _write(tmp_path, TINY.format(A=0.25))
    assert main(["eig", "--config", cfg, "--out", str(tmp_path / "e")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["lambda0"] == pytest.approx(-0.5, abs=1e-3)
    assert info["c_star"] == pytest.approx(2 * math.sqrt(0.5), abs=2e-3)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "mass.csv").is_file() and not (tmp_path / "s" / "summary.json").exists()


def test_cli_schema_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "growth.A = -1\n")
    assert main(["run", "--config", cfg]) == 2
    assert "A must be positive" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.txt")]) == 2


def test_cli_numerical_error_exit_code(tmp_path, capsys):
    # constant data touches the trait-window edge
    doc = TINY.format(A=0.25).replace("initial.tail.kind = compact",
                                      "initial.tail.kind = constant\ninitial.profile = eigen_profile")
    doc = doc.replace("solver.Y_half_width = 9", "solver.Y_half_width = 3")
    cfg = _write(tmp_path, doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert "WindowTooNarrow" in capsys.readouterr().err


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_A_and_thread_independence(tmp_path):
    base = parse_scenario(TINY.format(A=0.25))
    d1 = pipeline.sweep(base, "A", ["0.25", "1", "4"], str(tmp_path / "one"), threads=1)
    d3 = pipeline.sweep(base, "A", ["0.25", "1", "4"], str(tmp_path / "three"), threads=3)
    rows = _rows(d1 / "sweep.csv")
    lam = [float(r["lambda0"]) for r in rows]
    assert lam == pytest.approx([-0.5, 0.0, 1.0], abs=1e-3)
    assert (d1 / "sweep.csv").read_bytes() == (d3 / "sweep.csv").read_bytes()
    for v in ("0.25", "1", "4"):
        for name in ("mass.csv", "level_sets.csv"):
            assert (d1 / f"A={v}" / name).read_bytes() == (d3 / f"A={v}" / name).read_bytes()


def test_sweep_mu_gives_identical_envelopes(tmp_path):
    base = parse_scenario(TINY_ALGEBRAIC)
    d = pipeline.sweep(base, "mu", ["0.05", "0.02"], str(tmp_path / "mu"), threads=2)
    a = _rows(d / "mu=0.05" / "level_sets.csv")
    b = _rows(d / "mu=0.02" / "level_sets.csv")
    assert [r["lower_bound"] for r in a] == [r["lower_bound"] for r in b]
    assert [r["upper_bound"] for r in a] == [r["upper_bound"] for r in b]
    assert any(r["lower_bound"] for r in a)


def test_cli_sweep(tmp_path, capsys):
    cfg = _write(tmp_path, TINY.format(A=0.25))
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw"), "--param", "B", "--values", "0, 0.5"]) == 0
    assert len(_rows(tmp_path / "sw" / "sweep.csv")) == 2
    with pytest.raises(ValueError):
        pipeline.sweep(parse_scenario(TINY.format(A=0.25)), "kernel.k_minus", [1.0])
