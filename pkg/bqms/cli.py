"""Scenario runner.

    bqms run <scenario.json> [--out DIR] [--tol KEY=VAL]... [--seed N]
    bqms verify-paper [--out DIR]

A scenario is a JSON object naming a model, a generator, a symmetry datum
and one experiment. Matrices are nested lists whose entries are either all
plain reals or all `[re, im]` pairs. Exit status is 0 on success, 2 when an
asserted check fails and 1 on bad input.
"""

import argparse
import csv
import datetime
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import channel, generator, gradientflow, hash, instances, sampling, scanners, symmetry
from .gradientflow import FlowTrace
from .inclusion import B2, InclusionModel, model_from
from .util import (BQMSError, ParseError, ShapeError, Tolerances, VerificationFailure,
                   norm2, tolerances, within)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILED = 2

CSV_HEADER = ["t", "entropy", "metric_norm", "lsi_margin", "talagrand_slack"]

GENERATORS = ("explicit_multiplier", "l0_plus_l1", "jumps", "paper_example_c4")
DELTAS = ("none", "modular", "explicit", "solve")
EXPERIMENTS = ("classify", "poincare", "flow", "lsi", "talagrand", "intertwine", "limit")
DYNAMIC = ("flow", "lsi", "talagrand")
# relative bound between the closed-form rate of H and its central difference
RATE_TOLERANCE = 1e-4


# -- parsing


def parse_matrix(value, shape, name: str) -> np.ndarray:
    """A matrix of the given shape from nested lists of reals or `[re, im]`
    pairs.

    Raises:
        ShapeError"""
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ShapeError("%s: entries must be all numbers or all [re, im] pairs" % name)
    shape = tuple(shape)
    if a.shape == shape:
        return a.astype(complex)
    if a.shape == shape + (2,):
        return a[..., 0] + 1j * a[..., 1]
    raise ShapeError("%s must have shape %s, got %s" % (name, shape, a.shape))


def parse_m(model: InclusionModel, value, name: str) -> np.ndarray:
    """An element of M. Spin elements may also be given by their diagonal."""
    n = model.n
    try:
        return model.as_m(parse_matrix(value, (n, n), name))
    except ShapeError:
        if model.kind != "spin":
            raise
    return model.as_m(parse_matrix(value, (n,), name))


def parse_b2(model: InclusionModel, value, name: str) -> np.ndarray:
    return parse_matrix(value, model.shape_of(B2), name)


def parse_grid(value) -> np.ndarray:
    if isinstance(value, dict):
        try:
            return np.linspace(float(value.get("start", 0.0)), float(value["stop"]),
                               int(value.get("num", 51)))
        except KeyError:
            raise ParseError("grid needs a stop time")
    if not isinstance(value, list) or not value:
        raise ParseError("grid must be a nonempty list of times or {start, stop, num}")
    return np.array(value, dtype=float)


def _require_key(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError("%s needs a %r entry" % (where, key))
    return obj[key]


def _kind(obj, where: str, allowed) -> str:
    kind = _require_key(obj, "kind", where)
    if kind not in allowed:
        raise ParseError("%s kind must be one of %s, got %r" % (where, ", ".join(allowed), kind))
    return kind


def load_scenario(path) -> dict:
    """Reads a scenario file.

    Raises:
        ParseError: with the line and column of the JSON error"""
    text = Path(path).read_text(encoding="utf-8")
    try:
        scenario = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError("scenario is not valid JSON: %s" % e.msg, e.lineno, e.colno)
    if not isinstance(scenario, dict):
        raise ParseError("scenario must be a JSON object", 1, 1)
    return scenario


class Scenario:
    """A scenario resolved into library objects.

    Members:
        name (str)
        seed (int)
        tol (Tolerances)
        model (InclusionModel)
        L (Lindbladian)
        delta (Optional[SymmetryDatum])
        solution (Optional[DeltaSolution]): set when the datum was solved for
        fermion (Optional[FermionModel])
        channel (Optional[BimoduleChannel])
        experiment (dict)"""

    def __init__(self, raw: dict, seed: Optional[int] = None,
                 overrides: Optional[Dict[str, float]] = None) -> None:
        self.raw = raw
        self.name = str(raw.get("name", "scenario"))
        self.seed = int(raw.get("seed", 0) if seed is None else seed)
        self.tol = self._tolerances(raw.get("tolerances", {}), overrides or {})
        self.experiment = _require_key(raw, "experiment", "scenario")
        self.kind = _kind(self.experiment, "experiment", EXPERIMENTS)
        self.fermion = None
        self.solution = None
        self.channel = None
        self.generator_kind = None
        self._model(_require_key(raw, "model", "scenario"))
        self._generator(raw.get("generator"))
        self._delta(raw.get("delta"))
        if "channel" in raw:
            t = parse_matrix(raw["channel"], (self.model.gns_dim,) * 2, "channel")
            self.channel = channel.from_superoperator(self.model, t)
        self._validate_experiment()

    @staticmethod
    def _tolerances(block, overrides: Dict[str, float]) -> Tolerances:
        if not isinstance(block, dict):
            raise ParseError("tolerances must be an object of KEY: VALUE pairs")
        merged = dict(block)
        merged.update(overrides)
        return tolerances().replace(**merged)

    def _model(self, spec: dict) -> None:
        kind = _kind(spec, "model", ("spin", "full", "fermion"))
        if kind == "fermion":
            m = int(_require_key(spec, "m", "fermion model"))
            a = spec.get("a", [1.0] * m)
            beta = float(spec.get("beta", 1.0))
            self.fermion = gradientflow.fermion_model(m, a, beta, self.tol)
            self.model = self.fermion.model
            return
        self.model = model_from(kind, int(_require_key(spec, "n", "model")))

    def _generator(self, spec) -> None:
        model = self.model
        if self.fermion is not None:
            if spec is not None:
                log.info("fermion model supplies its own generator; ignoring the generator block")
            self.L = self.fermion.L
            return
        if spec is None:
            raise ParseError("scenario needs a generator")
        kind = self.generator_kind = _kind(spec, "generator", GENERATORS)
        tol = self.tol
        if kind == "explicit_multiplier":
            lhat = parse_b2(model, _require_key(spec, "lhat", "explicit_multiplier"), "lhat")
            self.L = generator.from_multiplier(model, lhat, tol)
        elif kind == "l0_plus_l1":
            l0 = parse_b2(model, _require_key(spec, "l0", "l0_plus_l1"), "l0")
            l1 = parse_m(model, spec["l1"], "l1") if "l1" in spec else None
            self.L = generator.build(model, l0, l1, tol)
        elif kind == "jumps":
            if model.kind != "full":
                raise ShapeError("jump operators need a full matrix model; use l0_plus_l1")
            kraus = []
            for i, jump in enumerate(_require_key(spec, "jumps", "jumps generator")):
                v = parse_matrix(_require_key(jump, "v", "jump %d" % i), (model.n, model.n), "jump %d" % i)
                kraus.append(np.sqrt(float(jump.get("rate", 1.0))) * v)
            h = parse_m(model, spec["hamiltonian"], "hamiltonian") if "hamiltonian" in spec else None
            self.L = generator.build(model, sampling.kraus_multiplier(model, kraus), h, tol)
        else:
            if model.kind != "spin" or model.n != 4:
                raise ShapeError("paper_example_c4 lives on spin(4)")
            self.L = instances.c4_generator(tol)

    def _delta(self, spec) -> None:
        if spec is None:
            self.delta = self.fermion.delta if self.fermion is not None else None
            return
        kind = _kind(spec, "delta", DELTAS)
        model, tol = self.model, self.tol
        if kind == "none":
            self.delta = None
        elif kind == "modular":
            rho = parse_m(model, _require_key(spec, "rho", "modular delta"), "rho")
            make = symmetry.modular_multiplier_half if spec.get("half") else symmetry.modular_multiplier
            self.delta = make(model, rho, tol)
        elif kind == "explicit":
            z = parse_b2(model, _require_key(spec, "delta_hat", "explicit delta"), "delta_hat")
            self.delta = symmetry.SymmetryDatum(model, z, bool(spec.get("half")), tol=tol)
        else:
            self.solution = symmetry.solve_delta(self.L, tol)
            self.delta = self.solution.datum

    def _validate_experiment(self) -> None:
        exp = self.experiment
        if self.kind in DYNAMIC:
            self.d0 = parse_m(self.model, _require_key(exp, "D0", "%s experiment" % self.kind), "D0")
            self.grid = parse_grid(exp.get("grid", {"stop": 5.0, "num": 51}))
        elif self.kind == "limit" and "D0" in exp:
            self.d0 = parse_m(self.model, exp["D0"], "D0")
        else:
            self.d0 = None
        if self.kind in DYNAMIC + ("limit",) and self.delta is None:
            raise ParseError("the %s experiment needs a symmetry datum" % self.kind)
        if self.kind == "intertwine" and self.fermion is None:
            raise ParseError("the intertwine experiment needs a fermion model")

    def rng(self) -> np.random.Generator:
        return sampling.rng(self.seed)


# -- reports


class Report:
    """Named checks and results, in the order they were made."""

    def __init__(self, name: str) -> None:
        self.name = name
        self.checks = []  # type: List[Dict[str, Any]]
        self.results = {}  # type: Dict[str, Any]

    def check(self, op: str, name: str, residual: float, tol: float, passed: bool) -> bool:
        self.checks.append({"name": "%s/%s" % (op, name), "residual": float(residual),
                            "tolerance": float(tol), "passed": bool(passed)})
        if not passed:
            log.warning("check %s/%s failed: residual %.3g, tolerance %.3g", op, name, residual, tol)
        return passed

    def extend(self, op: str, checks) -> None:
        for name, residual, tol, passed in checks:
            self.check(op, name, residual, tol, passed)

    @property
    def failed(self) -> List[str]:
        return [c["name"] for c in self.checks if not c["passed"]]

    def as_dict(self, extra: Optional[dict] = None) -> dict:
        out = {"name": self.name, "checks": self.checks, "results": self.results,
               "failed": self.failed, "passed": not self.failed}
        out.update(extra or {})
        out = hash.plain(out)
        out["digest"] = hash.to_hex(hash.report(out))
        out["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return out


def write_report(report: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fp:
        json.dump(report, fp, indent=2, sort_keys=True)
        fp.write("\n")
    log.info("wrote %s", path)
    return path


def emit_csv(trace: FlowTrace, path) -> Path:
    """Writes `t,entropy,metric_norm,lsi_margin,talagrand_slack`, one row per
    grid point, floats with 17 significant digits."""
    if not len(trace):
        raise ShapeError("cannot write an empty trace")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in trace.rows():
            writer.writerow(["%.17g" % x for x in row])
    log.info("wrote %s", path)
    return path


# -- experiments


def _generator_checks(sc: Scenario, report: Report) -> None:
    gen = generator.validate(sc.model, sc.L.lhat, sc.tol)
    report.extend("validate", gen.checks)
    jumps = sc.L.jumps()
    report.results["generator"] = {
        "jumps": len(jumps), "gauge_degenerate": jumps.gauge_note,
        "min_eigenvalue": gen.min_eigenvalue,
        "hamiltonian_norm": norm2(generator.hamiltonian(sc.L)),
    }


def _symmetry_checks(sc: Scenario, report: Report) -> None:
    if sc.solution is not None:
        sol = sc.solution
        realized = sol.realizability
        report.results["solve_delta"] = {
            "status": sol.status, "witness": sol.witness,
            "state_realizable": None if realized is None else realized.realizable,
            "state_witnesses": [] if realized is None else realized.witnesses,
        }
        if sc.generator_kind == "paper_example_c4" and realized is not None:
            report.results["solve_delta"].update(_quoted_c4(realized.witnesses))
    if sc.delta is None:
        return
    if sc.delta.half:
        report.extend("check_bimodule_kms", symmetry.check_bimodule_kms(sc.L, sc.delta, sc.tol).checks)
    else:
        report.extend("check_bimodule_gns", symmetry.check_bimodule_gns(sc.L, sc.delta, sc.tol).checks)
    if sc.solution is None:
        realized = symmetry.state_realizability(sc.delta, tol=sc.tol)
        report.results["state_realizability"] = {
            "realizable": realized.realizable, "witnesses": realized.witnesses}
        if sc.generator_kind == "paper_example_c4":
            report.results["state_realizability"].update(_quoted_c4(realized.witnesses))


def _quoted_c4(witnesses: List[str]) -> Dict[str, Any]:
    return {"quoted_witness": instances.C4_QUOTED_CONTRADICTION,
            "quoted_cycle": instances.quoted_cycle_witness(witnesses)}


def run_classify(sc: Scenario, report: Report) -> None:
    _generator_checks(sc, report)
    _symmetry_checks(sc, report)
    if sc.channel is not None:
        c = channel.classify(sc.channel, sc.tol)
        report.results["channel"] = {"cp": c.cp, "unital": c.unital,
                                     "trace_preserving": c.trace_preserving,
                                     "residuals": c.residuals}
        report.results["irreducibility"] = channel.relative_irreducibility(sc.channel, sc.tol).verdict


def run_poincare(sc: Scenario, report: Report) -> None:
    _generator_checks(sc, report)
    pr = generator.poincare_margins(sc.L, tol=sc.tol)
    gen = sc.rng()
    samples = int(sc.experiment.get("samples", 100))
    margins = [pr.margin(sampling.traceless(gen, sc.model)) for _ in range(samples)]
    worst = min(margins) if margins else 0.0
    report.results["poincare"] = {
        "beta_hat": pr.beta_hat, "beta": pr.beta, "beta_traceless": pr.beta_traceless,
        "bound0": pr.bound0, "bound1_diagnostic": pr.bound1_diagnostic,
        "connected": pr.connected, "samples": samples, "min_margin": worst,
    }
    if pr.connected:
        report.check("poincare_margins", "min_margin", max(0.0, -worst), sc.tol.equality, worst >= -sc.tol.equality)


def _beta(sc: Scenario, report: Report) -> float:
    if "beta" in sc.experiment:
        return float(sc.experiment["beta"])
    if sc.fermion is None:
        raise ParseError("the %s experiment needs an intertwining constant beta" % sc.kind)
    fit = gradientflow.find_intertwining(sc.L, list(sc.fermion.extensions.values()),
                                         sc.fermion.directions(), tol=sc.tol)
    report.results["intertwining"] = {"extension": fit.extension.name, "beta": fit.beta,
                                      "residual": fit.residual}
    return fit.beta


def _attach_csv(report: Report, trace: FlowTrace, out: Path, name: str) -> None:
    path = emit_csv(trace, out / ("%s.csv" % name))
    report.results["csv"] = {"file": path.name, "sha256": hash.to_hex(hash.at(path))}


def _flow_checks(sc: Scenario, report: Report, trace: FlowTrace) -> None:
    tol = sc.tol
    increase = float(np.max(np.diff(trace.entropies), initial=0.0))
    scale = abs(trace.entropies[0])
    report.check("flow", "entropy_nonincreasing", max(increase, 0.0), tol.equality,
                 within(increase, tol.equality, scale))
    adjoint = gradientflow.generator_adjoint(sc.L, sc.d0)
    divergence = gradientflow.divergence_form_adjoint(sc.L, sc.delta, sc.d0, tol=tol)
    residual = norm2(adjoint - divergence)
    if norm2(generator.hamiltonian(sc.L)) <= tol.hermitian:
        report.check("divergence_form_adjoint", "residual", residual, np.sqrt(tol.equality),
                     within(residual, np.sqrt(tol.equality), norm2(adjoint)))
    t = float(np.median(trace.times)) or 1.0
    rate, difference = gradientflow.central_slope(sc.L, sc.delta, sc.d0, t, hidden=trace.hidden, tol=tol)
    report.check("flow", "rate_identity", abs(rate - difference), RATE_TOLERANCE,
                 within(abs(rate - difference), RATE_TOLERANCE, abs(difference)))
    js = gradientflow.joint_spectrum(sc.L, sc.delta, tol)
    gen = sc.rng()
    samples = [sc.d0] + [sampling.density(gen, sc.model) for _ in range(3)]
    report.results["flow"] = {
        "points": len(trace), "initial_entropy": trace.entropies[0],
        "final_entropy": trace.entropies[-1], "limit_entropy": trace.limit_entropy,
        "path_length": gradientflow.path_length(trace),
        "violations": trace.violations,
        "hidden_spread": gradientflow.hidden_density_spread(js, samples, regularize=True, tol=tol),
    }


def _gns_gate(sc: Scenario, report: Report) -> bool:
    checks = symmetry.check_bimodule_gns(sc.L, sc.delta, sc.tol).checks
    report.extend("check_bimodule_gns", checks)
    return not any(not passed for _, _, _, passed in checks)


def run_flow(sc: Scenario, report: Report, out: Path) -> None:
    if not _gns_gate(sc, report):
        return
    beta = sc.experiment.get("beta")
    trace = gradientflow.flow(sc.L, sc.delta, sc.d0, sc.grid,
                              None if beta is None else float(beta), tol=sc.tol)
    _flow_checks(sc, report, trace)
    _attach_csv(report, trace, out, sc.name)


def run_lsi(sc: Scenario, report: Report, out: Path) -> None:
    if not _gns_gate(sc, report):
        return
    beta = _beta(sc, report)
    trace = gradientflow.lsi_report(sc.L, sc.delta, sc.d0, sc.grid, beta, tol=sc.tol)
    _flow_checks(sc, report, trace)
    floor = np.sqrt(sc.tol.equality)
    worst = float(np.min(trace.lsi_margins))
    envelope = float(np.min(trace.envelope_slacks))
    report.check("lsi_report", "margin", max(0.0, -worst), floor, worst >= -floor)
    report.check("lsi_report", "envelope", max(0.0, -envelope), floor, envelope >= -floor)
    report.results["lsi"] = {"beta": beta, "min_margin": worst, "min_envelope_slack": envelope}
    _attach_csv(report, trace, out, sc.name)


def run_talagrand(sc: Scenario, report: Report, out: Path) -> None:
    if not _gns_gate(sc, report):
        return
    beta = _beta(sc, report)
    horizon = sc.experiment.get("horizon")
    tr = gradientflow.talagrand_report(sc.L, sc.delta, sc.d0, beta,
                                       None if horizon is None else float(horizon),
                                       int(sc.experiment.get("points", 801)), sc.tol)
    slack = 1e-6
    report.check("talagrand_report", "bound", max(0.0, -tr.slack), slack, tr.slack >= -slack)
    report.results["talagrand"] = {"beta": beta, "path_length": tr.path_length, "bound": tr.bound}
    _attach_csv(report, tr.trace, out, sc.name)


def run_intertwine(sc: Scenario, report: Report) -> None:
    fm = sc.fermion
    threshold = float(sc.experiment.get("threshold", 1e-9))
    fit = gradientflow.find_intertwining(sc.L, list(fm.extensions.values()), fm.directions(),
                                         threshold, sc.tol)
    report.check("find_intertwining", "residual", fit.residual, threshold, fit.residual <= threshold)
    report.results["intertwining"] = {
        "extension": fit.extension.name, "beta": fit.beta, "residual": fit.residual,
        "residuals": fit.residuals, "expected_beta": fm.beta_tilde,
    }


def run_limit(sc: Scenario, report: Report) -> None:
    lr = symmetry.semigroup_limit(sc.L, sc.delta, sc.tol)
    floor = np.sqrt(sc.tol.equality)
    report.results["limit"] = {"applicable": lr.applicable, "residual": lr.residual, "time": lr.time}
    if lr.applicable:
        report.check("semigroup_limit", "closed_form", lr.residual, floor, lr.residual <= floor)
    if sc.d0 is not None and sc.delta.rho is not None:
        expected = sc.model.tau_m(sc.d0) * sc.delta.rho
        residual = norm2(lr.density_limit(sc.d0) - expected)
        report.check("semigroup_limit", "density", residual, floor, residual <= floor)


def run(scenario_path, out: Path, overrides: Optional[Dict[str, float]] = None,
        seed: Optional[int] = None) -> int:
    """Runs one scenario file and writes its artifacts into `out`.

    Returns:
        the exit status"""
    sc = Scenario(load_scenario(scenario_path), seed, overrides)
    report = Report(sc.name)
    log.info("running %s (%s on %r)", sc.name, sc.kind, sc.model)
    if sc.kind == "classify":
        run_classify(sc, report)
    elif sc.kind == "poincare":
        run_poincare(sc, report)
    elif sc.kind == "flow":
        run_flow(sc, report, out)
    elif sc.kind == "lsi":
        run_lsi(sc, report, out)
    elif sc.kind == "talagrand":
        run_talagrand(sc, report, out)
    elif sc.kind == "intertwine":
        run_intertwine(sc, report)
    else:
        run_limit(sc, report)
    extra = {"seed": sc.seed, "tolerances": sc.tol.as_dict(), "experiment": sc.kind,
             "model": repr(sc.model)}
    write_report(report.as_dict(extra), out / ("%s.report.json" % sc.name))
    return EXIT_FAILED if report.failed else EXIT_OK


# -- built-in suite


def verify_paper(out: Path, tol: Optional[Tolerances] = None) -> Report:
    """Checks the instances whose answers are known exactly."""
    tol = tolerances(tol)
    report = Report("verify-paper")
    floor = np.sqrt(tol.equality)

    # the four-point walk
    L = instances.c4_generator(tol)
    delta = instances.c4_delta(tol)
    gns = symmetry.check_bimodule_gns(L, delta, tol)
    report.check("check_bimodule_gns", "c4", gns.residual, 1e-12, gns.residual < 1e-12)
    realized = symmetry.state_realizability(delta, tol=tol)
    missing = [w for w in instances.C4_WITNESSES if w not in realized.witnesses]
    report.check("state_realizability", "c4_witnesses", float(len(missing)), 0.0,
                 not realized.realizable and not missing)
    quoted = _quoted_c4(realized.witnesses)
    report.check("state_realizability", "c4_quoted_cycle", 0.0 if quoted["quoted_cycle"] else 1.0, 0.0,
                 quoted["quoted_cycle"] is not None)
    solution = symmetry.solve_delta(L, tol)
    residual = (norm2(solution.datum.delta_hat.data - delta.delta_hat.data)
                if solution.datum is not None else float("inf"))
    report.check("solve_delta", "c4", residual, floor, residual <= floor)
    pr = generator.poincare_margins(L, tol=tol)
    gen = sampling.rng(0)
    worst = min(pr.margin(sampling.traceless(gen, L.model)) for _ in range(100))
    report.check("poincare_margins", "c4", max(0.0, -worst), tol.equality, worst >= -tol.equality)
    lr = symmetry.semigroup_limit(L, delta, tol)
    d0 = sampling.density(gen, L.model)
    expected = L.model.tau_m(d0) * gradientflow.stationary_density(L, tol)
    residual = norm2(lr.density_limit(d0) - expected)
    report.check("semigroup_limit", "c4_inapplicable", residual, floor,
                 not lr.applicable and residual <= floor)
    report.results["c4"] = dict(quoted, witnesses=realized.witnesses, beta_hat=pr.beta_hat,
                                beta=pr.beta, limit_applicable=lr.applicable)

    # the identity channel
    for model in (model_from("spin", 4), model_from("full", 3)):
        ch = channel.from_superoperator(model, np.eye(model.gns_dim))
        residual = norm2(ch.multiplier.data - model.e2() / np.sqrt(model.lam))
        report.check("identity", repr(model), residual, 1e-12, residual <= 1e-12)

    # a detailed balanced Davies generator: hidden density and limit
    model = model_from("full", 2)
    gen = sampling.rng(1)
    d = sampling.density(gen, model, 5.0)
    L = generator.build(model, sampling.reversible_l0(gen, model, d), None, tol)
    delta = symmetry.modular_multiplier(model, d, tol)
    js = gradientflow.joint_spectrum(L, delta, tol)
    hidden = gradientflow.hidden_density(js, sampling.density(gen, model), tol=tol)
    residual = norm2(hidden - d)
    report.check("hidden_density", "modular", residual, 1e-8, residual <= 1e-8)
    lr = symmetry.semigroup_limit(L, delta, tol)
    report.check("semigroup_limit", "closed_form", lr.residual, 1e-8, lr.applicable and lr.residual <= 1e-8)
    rate, diff = gradientflow.central_slope(L, delta, sampling.density(gen, model), 1.0, tol=tol)
    report.check("flow", "rate_identity", abs(rate - diff), RATE_TOLERANCE,
                 within(abs(rate - diff), RATE_TOLERANCE, abs(diff)))

    # free fermions
    fm = gradientflow.fermion_model(2, [1.0, 1.0], 1.0, tol)
    fit = gradientflow.find_intertwining(fm.L, list(fm.extensions.values()), fm.directions(), tol=tol)
    report.check("find_intertwining", "fermion_m2", fit.residual, 1e-9, fit.residual < 1e-9)
    control = gradientflow.intertwining_check(fm.L, fm.extensions["left_factor"], fit.beta,
                                              fm.directions(), tol)
    report.check("intertwining_check", "negative_control", control, 1e-2, control > 1e-2)
    report.results["fermion"] = {"extension": fit.extension.name, "beta": fit.beta,
                                 "expected_beta": fm.beta_tilde, "negative_control": control}

    write_report(report.as_dict(), out / "verify-paper.report.json")
    return report


# -- entry point


def setup_logging(verbose: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(name)s: %(message)s"))
    root = logging.getLogger("bqms")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bqms", description="Bimodule quantum Markov semigroup checks")
    p.add_argument("--verbose", "-v", action="store_true", help="log at debug level")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("scenario", help="scenario JSON file")
    r.add_argument("--out", default=".", help="directory for the report and CSV")
    r.add_argument("--tol", action="append", default=[], metavar="KEY=VAL",
                   help="override one tolerance (repeatable)")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    v = sub.add_parser("verify-paper", help="run the built-in suite of exact instances")
    v.add_argument("--out", default=".", help="directory for the report")
    v.add_argument("--tol", action="append", default=[], metavar="KEY=VAL")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = parser().parse_args(argv)
    setup_logging(args.verbose)
    if args.command is None:
        parser().print_help()
        return EXIT_INPUT
    try:
        overrides = scanners.tolerances(args.tol)
        out = Path(args.out)
        if args.command == "run":
            return run(args.scenario, out, overrides, args.seed)
        report = verify_paper(out, tolerances().replace(**overrides))
        for c in report.checks:
            print("%s %s (residual %.3g)" % ("PASS" if c["passed"] else "FAIL", c["name"], c["residual"]))
        return EXIT_FAILED if report.failed else EXIT_OK
    except VerificationFailure as e:
        log.error("%s", e)
        return EXIT_FAILED
    except (BQMSError, OSError, ValueError, TypeError) as e:
        log.error("%s", e)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
