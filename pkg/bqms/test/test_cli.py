import json

import numpy as np
import pytest
import bqms as bq

cli = bq.cli

C4 = {
    "name": "c4",
    "model": {"kind": "spin", "n": 4},
    "generator": {"kind": "paper_example_c4"},
    "delta": {"kind": "solve"},
    "experiment": {"kind": "classify"},
}

TWO_POINT = {
    "name": "two_point",
    "seed": 3,
    "model": {"kind": "spin", "n": 2},
    "generator": {"kind": "l0_plus_l1", "l0": [[0.0, 1.0], [2.0, 0.0]]},
    "delta": {"kind": "modular", "rho": [1.0, 2.0]},
    "experiment": {"kind": "flow", "D0": [1.5, 0.5], "grid": [0.0, 0.5, 1.0, 2.0]},
}


def _write(tmp_path, scenario, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(scenario))
    return path


def _report(out, name):
    return json.loads((out / ("%s.report.json" % name)).read_text())


def test_c4_classify(tmp_path):
    """The four-point walk classifies cleanly and reports its witnesses"""
    path = _write(tmp_path, C4)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    report = _report(tmp_path, "c4")
    assert report["passed"]
    solved = report["results"]["solve_delta"]
    assert solved["status"] == "found"
    assert not solved["state_realizable"]
    assert solved["state_witnesses"] == bq.instances.C4_WITNESSES
    assert "check_bimodule_gns/gns.bimodule" in [c["name"] for c in report["checks"]]


def test_flow_writes_csv(tmp_path):
    """A flow scenario writes a report and a CSV with one row per grid point"""
    path = _write(tmp_path, TWO_POINT)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    lines = (tmp_path / "two_point.csv").read_text().splitlines()
    assert lines[0] == ",".join(cli.CSV_HEADER)
    assert len(lines) == 5
    assert lines[1].split(",")[3] == "nan"
    report = _report(tmp_path, "two_point")
    assert report["seed"] == 3
    assert report["results"]["flow"]["points"] == 4
    assert report["results"]["flow"]["hidden_spread"] < 1e-6
    csv = report["results"]["csv"]
    assert csv["file"] == "two_point.csv"
    assert csv["sha256"] == bq.hash.to_hex(bq.hash.at(tmp_path / "two_point.csv"))


def test_flow_needs_initial_density(tmp_path):
    """Dynamic experiments without D0 are input errors"""
    scenario = dict(TWO_POINT, experiment={"kind": "flow"})
    path = _write(tmp_path, scenario)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_INPUT
    with pytest.raises(bq.util.ParseError):
        cli.Scenario(scenario)


def test_bad_input(tmp_path):
    """Broken JSON, unknown kinds and bad tolerance overrides exit with 1"""
    broken = tmp_path / "broken.json"
    broken.write_text('{"model": {"kind": "spin",\n "n": }}')
    with pytest.raises(bq.util.ParseError) as e:
        cli.load_scenario(broken)
    assert e.value.line == 2
    assert cli.main(["run", str(broken), "--out", str(tmp_path)]) == cli.EXIT_INPUT
    path = _write(tmp_path, dict(C4, generator={"kind": "magic"}), "magic.json")
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_INPUT
    path = _write(tmp_path, C4)
    assert cli.main(["run", str(path), "--out", str(tmp_path), "--tol", "bogus=1"]) == cli.EXIT_INPUT
    assert cli.main([]) == cli.EXIT_INPUT


def test_tolerance_override(tmp_path):
    """--tol replaces one field of the tolerance policy"""
    path = _write(tmp_path, C4)
    assert cli.main(["run", str(path), "--out", str(tmp_path), "--tol", "equality=1e-8",
                     "--seed", "9"]) == cli.EXIT_OK
    report = _report(tmp_path, "c4")
    assert report["tolerances"]["equality"] == 1e-8
    assert report["seed"] == 9


def test_fermion_intertwine(tmp_path):
    """The fermion scenario finds the parity twisted extension"""
    scenario = {"name": "fermion", "model": {"kind": "fermion", "m": 1, "beta": 1.0},
                "experiment": {"kind": "intertwine"}}
    path = _write(tmp_path, scenario)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    result = _report(tmp_path, "fermion")["results"]["intertwining"]
    assert result["extension"] == "parity_twisted"
    assert result["beta"] == pytest.approx(result["expected_beta"], rel=1e-8)


def test_intertwine_needs_fermions():
    """Only the fermion model carries a catalog of extensions"""
    with pytest.raises(bq.util.ParseError):
        cli.Scenario(dict(C4, experiment={"kind": "intertwine"}))


def test_digest_is_deterministic(tmp_path):
    """Two runs of one scenario differ only in their timestamps"""
    path = _write(tmp_path, TWO_POINT)
    first, second = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(path), "--out", str(first)]) == cli.EXIT_OK
    assert cli.main(["run", str(path), "--out", str(second)]) == cli.EXIT_OK
    a, b = _report(first, "two_point"), _report(second, "two_point")
    assert a["digest"] == b["digest"]
    assert a["digest"] == bq.hash.to_hex(bq.hash.report(a))
    assert (first / "two_point.csv").read_text() == (second / "two_point.csv").read_text()


def test_parse_matrix():
    """Matrices are all reals or all [re, im] pairs"""
    assert np.allclose(cli.parse_matrix([[1, 2], [3, 4]], (2, 2), "x"), [[1, 2], [3, 4]])
    z = cli.parse_matrix([[[0, 1], [1, 0]], [[0, 0], [2, -1]]], (2, 2), "x")
    assert z[0, 0] == 1j and z[1, 1] == 2 - 1j
    with pytest.raises(bq.util.ShapeError):
        cli.parse_matrix([[1, [0, 1]], [0, 1]], (2, 2), "x")
    with pytest.raises(bq.util.ShapeError):
        cli.parse_matrix([[1, 2, 3]], (2, 2), "x")
    assert np.allclose(cli.parse_grid({"stop": 1.0, "num": 3}), [0.0, 0.5, 1.0])
    with pytest.raises(bq.util.ParseError):
        cli.parse_grid([])


def test_emit_csv_rejects_empty(tmp_path):
    """An empty trace has nothing to write"""
    trace = bq.gradientflow.FlowTrace([], [], [], [], [], np.eye(2), 0.0)
    with pytest.raises(bq.util.ShapeError):
        cli.emit_csv(trace, tmp_path / "empty.csv")


VERIFY_PAPER_GOLDEN = {
    "checks": [
        "check_bimodule_gns/c4",
        "state_realizability/c4_witnesses",
        "state_realizability/c4_quoted_cycle",
        "solve_delta/c4",
        "poincare_margins/c4",
        "semigroup_limit/c4_inapplicable",
        "identity/Spin(4)",
        "identity/FullMatrix(3)",
        "hidden_density/modular",
        "semigroup_limit/closed_form",
        "flow/rate_identity",
        "find_intertwining/fermion_m2",
        "intertwining_check/negative_control",
    ],
    "c4": {
        "witnesses": bq.instances.C4_WITNESSES,
        "quoted_witness": "t4 = 4*t3 and t4 = 2/3*t3",
        "quoted_cycle": "t4 = 4/3*t3 and t4 = 2/3*t3",
        "limit_applicable": False,
    },
    "fermion_extension": "parity_twisted",
}


def test_verify_paper_matches_golden(tmp_path):
    """The built-in suite passes, runs its checks in order and reproduces the exact answers"""
    assert cli.main(["verify-paper", "--out", str(tmp_path)]) == cli.EXIT_OK
    report = json.loads((tmp_path / "verify-paper.report.json").read_text())
    assert report["passed"]
    assert [c["name"] for c in report["checks"]] == VERIFY_PAPER_GOLDEN["checks"]
    assert all(c["passed"] for c in report["checks"])
    c4 = report["results"]["c4"]
    for key, value in VERIFY_PAPER_GOLDEN["c4"].items():
        assert c4[key] == value
    assert report["results"]["fermion"]["extension"] == VERIFY_PAPER_GOLDEN["fermion_extension"]


def test_verify_paper_digest_is_stable(tmp_path):
    """Two runs differ only in their timestamp"""
    first = cli.verify_paper(tmp_path / "a").as_dict()
    second = cli.verify_paper(tmp_path / "b").as_dict()
    assert first["digest"] == second["digest"]
    first.pop("timestamp")
    second.pop("timestamp")
    assert first == second


def test_c4_classify_records_quoted_witness(tmp_path):
    """The classify report carries the quoted contradiction and the witness on the same cycle"""
    path = _write(tmp_path, C4)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    solved = _report(tmp_path, "c4")["results"]["solve_delta"]
    assert solved["quoted_witness"] == bq.instances.C4_QUOTED_CONTRADICTION
    assert solved["quoted_cycle"] == "t4 = 4/3*t3 and t4 = 2/3*t3"


def test_flow_reports_rate_identity(tmp_path):
    """A modular flow passes the rate check against a central difference"""
    path = _write(tmp_path, TWO_POINT)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_OK
    report = _report(tmp_path, "two_point")
    checks = {c["name"]: c for c in report["checks"]}
    assert checks["flow/rate_identity"]["passed"]
    assert report["results"]["flow"]["violations"] == []


def test_non_modular_flow_fails_rate_identity(tmp_path):
    """On the four-point walk the closed-form rate is off the true slope and the run fails"""
    scenario = {
        "name": "c4_flow",
        "model": {"kind": "spin", "n": 4},
        "generator": {"kind": "paper_example_c4"},
        "delta": {"kind": "solve"},
        "experiment": {"kind": "flow", "D0": [0.4, 0.8, 1.2, 1.6], "grid": [0.0, 0.5, 1.0, 2.0]},
    }
    path = _write(tmp_path, scenario)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == cli.EXIT_FAILED
    report = _report(tmp_path, "c4_flow")
    assert "flow/rate_identity" in report["failed"]
    assert any("rate identity" in v for v in report["results"]["flow"]["violations"])
