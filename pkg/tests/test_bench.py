import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from rhbkit import HarmonicBasis, assemble, degree_of, parse_system, recast, solve
from rhbkit.bench import corpus
from rhbkit.bench.cases import (builtin_case, constraint_schemes, duffing_branches, duffing_start,
                                generic_case, run_case, run_monte_carlo, run_scheme_study)
from rhbkit.bench.cli import main
from rhbkit.bench.report import emit_report, flatten, render

CONSERVATIVE_LINEAR = """\
system lin {
    var x;
    eq x'' + x = 0;
    conservative true;
    init x(0) = 0.5;
    init x'(0) = 0;
}
"""


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_corpus_is_complete():
    assert set(corpus.BUILTIN) == {"duffing", "vdp", "rayleigh_plesset", "relativistic",
                                   "pendulum", "asym_pendulum"}
    for name in corpus.BUILTIN:
        ode = corpus.load_system(f"builtin:{name}")
        assert degree_of(recast(ode)) == corpus.EXPECTED_DEGREE[name]


def test_unknown_builtin():
    with pytest.raises(KeyError, match="unknown builtin"):
        corpus.source_of("builtin:nope")


# --------------------------------------------------------------------------
# Cases

@pytest.mark.parametrize("name", ["pendulum", "relativistic", "duffing", "vdp",
                                  "rayleigh_plesset"])
def test_builtin_cases_converge(name):
    rep = run_case(builtin_case(name))
    assert rep.stage is None, rep.message
    assert rep.solver["converged"]
    assert rep.passed


def test_relativistic_errors_fall_with_order():
    errs = [run_case(builtin_case("relativistic", order=N)).errors["amplitude"] for N in (25, 35, 55)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-10


def test_pass_requires_thresholds_and_convergence():
    spec = builtin_case("relativistic", order=10)
    rep = run_case(spec)
    assert rep.solver["converged"] and not rep.passed
    assert rep.failures and rep.failures[0].startswith("amplitude")


def test_stage_failures_are_tagged():
    rep = run_case(generic_case("bad", "system b { var x; eq x'' + x = 0; init x(1) = 0; }"))
    assert not rep.passed and rep.stage == "recast"


def test_thresholds_must_be_positive():
    from dataclasses import replace
    with pytest.raises(ValueError):
        replace(builtin_case("pendulum"), thresholds=(("mean", 0.0),))


# --------------------------------------------------------------------------
# Scheme studies

def test_pendulum_scheme_ordering():
    study = run_scheme_study("pendulum")
    order = [k for k, _, _ in study.rows]
    assert order[-1] == 1
    m1, m2, m3 = (study.mean_error(k) for k in (1, 2, 3))
    assert m1 >= 100 * max(m2, m3)


def test_relativistic_both_constraints_at_least_as_good():
    study = run_scheme_study("relativistic", order=25)
    m = {k: study.mean_error(k) for k in (1, 2, 3)}
    assert m[3] <= min(m[1], m[2]) * (1 + 1e-6)


def test_linear_oscillator_schemes_agree():
    # amplitude and phase of a linear oscillator are a neutral family; the
    # displacement constraint pins it, a lone velocity constraint only fixes
    # the phase, so that scheme is held to the family rather than the point
    ps = recast(parse_system(CONSERVATIVE_LINEAR))
    basis = HarmonicBasis.single(1.0, 4)
    sols = {}
    for k, (label, scheme) in constraint_schemes(ps).items():
        problem = assemble(ps, basis, scheme)
        x0 = problem.guess({("x", 1, "cos"): 0.45, ("x__d1", 1, "sin"): -0.55, ("x", 0, "cos"): 0.05,
                            ("x", 3, "cos"): 0.02, ("x__d1", 2, "sin"): 0.01}, omega=0.9)
        rep = solve(problem, x0)
        assert rep.converged, label
        sols[label] = problem.unpack(rep.x)
    a, b = sols["displacement"], sols["both"]
    assert np.max(np.abs(a.flat - b.flat)) <= 1e-12
    exact = np.zeros_like(a.coeffs)
    exact[0, 1], exact[1, 2] = 0.5, -0.5
    assert np.max(np.abs(a.coeffs - exact)) <= 1e-12 and a.omega == pytest.approx(1.0, abs=1e-12)
    v = sols["velocity"]
    assert v.omega == pytest.approx(1.0, abs=1e-12)
    assert abs(v.coeffs[0, 2]) <= 1e-12  # x'(0) = 0
    assert np.max(np.abs(np.delete(v.coeffs, [1, 2], axis=1))) <= 1e-12


# --------------------------------------------------------------------------
# Monte-Carlo

def test_exact_start_lands_on_its_branch():
    problem = assemble(recast(corpus.load_system("duffing")), HarmonicBasis.single(2.0, 9))
    upper = duffing_branches()[-1]
    rep = solve(problem, problem.guess(dict(duffing_start(upper))))
    assert rep.converged
    mc = run_monte_carlo(variants=("rhb",), starts=[rep.x])
    assert mc.counts["rhb"]["upper"] == 1
    assert mc.percentages("rhb")["upper"] == 100.0


def test_monte_carlo_is_reproducible_and_order_free():
    a = run_monte_carlo(trials=6, seed=3, variants=("rhb",))
    b = run_monte_carlo(trials=6, seed=3, variants=("rhb",))
    assert a.counts == b.counts
    # trial i depends only on (seed, i)
    c = run_monte_carlo(trials=3, seed=3, variants=("rhb",))
    assert c.amplitudes["rhb"] == a.amplitudes["rhb"][:len(c.amplitudes["rhb"])]


def test_monte_carlo_rejects_single_response_sections():
    with pytest.raises(ValueError, match="three"):
        run_monte_carlo(trials=2, omega=5.0)


# --------------------------------------------------------------------------
# Reports

def test_render_formats():
    items = [{"case": "a", "errors": {"mean": 1e-3}, "pass": True, "wall_ms": 1.5},
             {"case": "b", "errors": {"mean": math.nan}, "pass": False, "wall_ms": 2.0}]
    js = json.loads(render(items, "json", timing=True))
    assert js[1]["errors"]["mean"] == "nan"
    text = render(items, "csv", timing=False)
    assert text.startswith("case,errors.mean,pass\r\n")
    assert len(text.split("\r\n")) == 4
    assert "wall_ms" not in text
    table = render(items, "table", timing=True).splitlines()
    assert table[0].split() == ["case", "errors.mean", "pass", "wall_ms"]
    assert flatten({"a": {"b": [1, 2]}}) == {"a.b": "[1,2]"}


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_report({"a": 1}, "json", tmp_path / "missing" / "out.json")


# --------------------------------------------------------------------------
# Command line

def test_solve_passing_case(capsys):
    code, out, _ = run_cli(capsys, "solve", "--system", "builtin:pendulum", "--no-timing")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] is True
    assert set(doc) >= {"case", "variant", "basis", "grid", "solver", "errors", "pass"}
    assert doc["grid"]["M"] == 76
    assert "wall_ms" not in doc


def test_solve_json_is_deterministic(capsys):
    runs = [run_cli(capsys, "solve", "--system", "builtin:relativistic", "--order", "25",
                    "--no-timing")[1] for _ in range(2)]
    assert runs[0] == runs[1]
    code, out, _ = run_cli(capsys, "solve", "--system", "builtin:relativistic", "--order", "25")
    assert "wall_ms" in json.loads(out)


def test_threshold_failure_names_the_metric(capsys):
    code, out, err = run_cli(capsys, "solve", "--system", "builtin:relativistic", "--order", "10")
    assert code == 1
    assert json.loads(out)["pass"] is False
    assert "amplitude" in err


def test_parse_error_is_a_usage_error(capsys, tmp_path):
    bad = tmp_path / "bad.sys"
    bad.write_text("system b { var x; eq x'' + = 0; }")
    code, _, err = run_cli(capsys, "solve", "--system", str(bad))
    assert code == 2 and "parse error" in err


@pytest.mark.parametrize("argv", [["solve"], ["solve", "--system", "builtin:nope"],
                                  ["solve", "--system", "/nonexistent/file"],
                                  ["fly"], ["sweep", "--points", "0"],
                                  ["scheme-study", "--system", "builtin:duffing"],
                                  ["mc", "--trials", "0"]])
def test_usage_errors(capsys, argv):
    assert run_cli(capsys, *argv)[0] == 2


def test_unwritable_output_exits_2(capsys, tmp_path):
    code, _, err = run_cli(capsys, "solve", "--system", "builtin:pendulum", "--out",
                           str(tmp_path / "no" / "such" / "dir.json"))
    assert code == 2 and "cannot write" in err


def test_sweep_writes_one_csv_row_per_point(capsys, tmp_path):
    path = tmp_path / "sweep.csv"
    code, _, _ = run_cli(capsys, "sweep", "--from", "1.0", "--to", "2.0", "--points", "6",
                         "--order", "5", "--out", str(path), "--no-timing")
    assert code == 0
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 7
    rows = list(csv.DictReader(io.StringIO(raw.decode(), newline="")))
    assert [float(r["param"]) for r in rows] == pytest.approx([1.0, 1.2, 1.4, 1.6, 1.8, 2.0])
    assert all(r["converged"] == "true" for r in rows)


def test_recast_prints_text_and_json(capsys):
    code, out, _ = run_cli(capsys, "recast", "--system", "builtin:pendulum")
    assert code == 0
    assert "theta__sin' = 1.0*theta__d1*theta__cos" in out
    code, out, _ = run_cli(capsys, "recast", "--system", "builtin:pendulum", "--format", "json")
    assert json.loads(out)["variables"][:2] == ["theta", "theta__d1"]


def test_scheme_study_table(capsys):
    code, out, _ = run_cli(capsys, "scheme-study", "--no-timing")
    lines = out.splitlines()
    assert code == 0
    assert lines[0].split()[:2] == ["scheme", "label"]
    assert [ln.split()[0] for ln in lines[1:]][-1] == "1"


def test_mc_cli(capsys):
    code, out, _ = run_cli(capsys, "mc", "--trials", "4", "--variant", "rhb", "--no-timing")
    doc = json.loads(out)
    assert code == 0 and doc["trials"] == 4
    assert sum(doc["counts"]["rhb"].values()) == 4


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rhbkit", "recast", "--system", "builtin:duffing",
                          "--format", "json"], capture_output=True, text=True, timeout=120)
    assert res.returncode == 0
    assert json.loads(res.stdout)["variables"] == ["x", "x__d1"]
