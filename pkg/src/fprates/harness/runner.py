"""Execute an experiment config: runs, analyses, checks and the report bundle."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from pathlib import Path

import numpy as np

from .. import analysis as an
from ..core import (
    ContractionProblem,
    ControlSchedule,
    NotContractiveError,
    check_contraction,
    cosine_problem,
    make_affine_contraction,
    scalar_affine,
)
from ..datadep import (
    InadmissibleSchedule,
    PerturbationSpec,
    check_schedule_for_datadep,
    data_dependence_batch,
    data_dependence_experiment,
    make_approximate_operator,
)
from ..oracle import compare_traces, exact_run
from ..schemes import IterationTrace, NonFiniteIterate, SchemeId, run_scheme
from .config import ConfigError, ExperimentConfig, load_config

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "FPRATES_OUTPUT_ROOT"
MAX_WORKERS = 4


class HarnessError(Exception):
    exit_code = 1


class InadmissibleError(HarnessError):
    exit_code = 3


class CheckFailed(HarnessError):
    exit_code = 4

    def __init__(self, bundle: "ReportBundle"):
        failed = [c.name for c in bundle.checks if not c.passed]
        super().__init__(f"{bundle.name}: {len(failed)} check(s) failed: {', '.join(failed)}")
        self.bundle = bundle


class NumericFault(HarnessError):
    exit_code = 5


class OutputError(HarnessError):
    exit_code = 6


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ReportBundle:
    name: str
    directory: Path
    config: dict
    problem: dict
    traces: dict[str, dict]
    sections: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_payload(self) -> dict:
        return {
            "name": self.name,
            "config": self.config,
            "problem": self.problem,
            "traces": self.traces,
            "analyses": self.sections,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }

    @classmethod
    def from_payload(cls, payload: dict, directory: Path) -> "ReportBundle":
        # JSON keys are sorted on disk; restore the config's scheme order
        order = payload["config"].get("schemes", [])
        traces = payload["traces"]
        traces = {k: traces[k] for k in sorted(traces, key=lambda k: order.index(k) if k in order else len(order))}
        return cls(
            name=payload["name"],
            directory=Path(directory),
            config=payload["config"],
            problem=payload["problem"],
            traces=traces,
            sections=payload.get("analyses", {}),
            checks=[Check(**c) for c in payload.get("checks", [])],
        )


# ---------------------------------------------------------------------------


def build_problem(cfg: ExperimentConfig) -> ContractionProblem:
    spec = cfg.problem
    try:
        if spec.kind == "affine":
            return make_affine_contraction(spec.matrix, spec.offset, name=cfg.name)
        problem = cosine_problem(spec.dimension)
        check_contraction(problem, seed=cfg.seed)
        return problem
    except NotContractiveError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}") from exc


def build_perturbation(cfg: ExperimentConfig) -> PerturbationSpec | None:
    d = cfg.datadep
    if d is None:
        return None
    try:
        seed = d.seed if d.seed is not None else cfg.seed
        return PerturbationSpec(d.epsilon, d.mode, tuple(d.shift) if d.shift is not None else None, seed)
    except ValueError as exc:
        raise ConfigError(f"datadep: {exc}") from exc


def _gate(cfg: ExperimentConfig, problem: ContractionProblem, schedule: ControlSchedule) -> None:
    wanted = set(cfg.analyses)
    if wanted & {"bounds", "equivalence", "rates"} and not schedule.first_series_diverges:
        raise InadmissibleError("convergence analyses need sum_n alpha_n^1 = infinity")
    if "datadep" in wanted:
        try:
            check_schedule_for_datadep(schedule, cfg.datadep.max_n)
        except InadmissibleSchedule as exc:
            raise InadmissibleError(str(exc)) from exc
    if "theta" in wanted and not all(schedule.bounded_below()):
        raise InadmissibleError("the theta ratio needs every control bounded below by a positive constant")
    exact_ok = problem.affine is not None and schedule.is_constant
    if "oracle" in wanted and not exact_ok:
        raise ConfigError("the oracle analysis needs an affine problem and a constant schedule")
    if "rates" in wanted and cfg.rates.source == "exact" and not exact_ok:
        raise ConfigError("exact rate source needs an affine problem and a constant schedule")


def _trace_payload(trace: IterationTrace, problem: ContractionProblem) -> dict:
    return {
        "scheme": trace.scheme.value,
        "problem": problem.name,
        "termination": trace.termination,
        "steps": trace.steps,
        "iterates": trace.iterates.tolist(),
        "errors": None if trace.errors is None else trace.errors.tolist(),
        "residuals": trace.residuals.tolist(),
        "columns": {},
    }


class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.schedule = ControlSchedule(cfg.schedule.family, tuple(cfg.schedule.parameters))
        self.problem = build_problem(cfg)
        self.perturbation = build_perturbation(cfg)
        self.approx = make_approximate_operator(self.problem, self.perturbation) if self.perturbation else None
        if len(cfg.x0) != self.problem.dimension:
            raise ConfigError(f"x0 has dimension {len(cfg.x0)}, problem has {self.problem.dimension}")
        self.traces: dict[str, IterationTrace] = {}
        self.checks: list[Check] = []
        self.sections: dict = {}
        self.equivalence: an.EquivalenceReport | None = None
        self.datadep_main = None

    def check(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))
        log.info("%s: %s %s", name, "pass" if passed else "FAIL", detail)

    def problem_for(self, scheme: SchemeId) -> ContractionProblem:
        return self.approx if scheme is SchemeId.KO_PERTURBED else self.problem

    def run(self, scheme: SchemeId, max_n: int | None = None, tolerance: float | None = None,
            schedule: ControlSchedule | None = None, x0=None) -> IterationTrace:
        try:
            return run_scheme(
                self.problem_for(scheme),
                scheme,
                schedule or self.schedule,
                self.cfg.x0 if x0 is None else x0,
                max_n=self.cfg.stop.max_n if max_n is None else max_n,
                tolerance=tolerance,
            )
        except NonFiniteIterate as exc:
            raise NumericFault(str(exc)) from exc

    @property
    def exact_ok(self) -> bool:
        return self.problem.affine is not None and self.schedule.is_constant

    def exact_errors(self, scheme: SchemeId, steps: int) -> np.ndarray:
        return exact_run(self.problem_for(scheme), scheme, self.schedule, self.cfg.x0, steps).errors()


# ---------------------------------------------------------------------------
# analyses


def _bounds(ctx: _Context) -> None:
    cfg, problem = ctx.cfg, ctx.problem
    delta = problem.delta
    e0 = float(np.linalg.norm(np.asarray(cfg.x0) - problem.known_fixed_point))
    n_terms = max(len(t) for t in ctx.traces.values())
    bs = an.theoretical_bounds(e0, delta, ctx.schedule, n_terms)
    section: dict = {"e0": e0, "delta": delta, "exp_bound": bs.exp_bound.tolist()}
    columns = {"exp_bound": bs.exp_bound}
    if bs.b_n is not None:
        section.update(b_n=bs.b_n.tolist(), a_n=bs.a_n.tolist(), theta_n=bs.theta_n.tolist(),
                       theta_step_ratio=bs.theta_step_ratio)
        columns.update(a_n=bs.a_n, b_n=bs.b_n, theta_n=bs.theta_n)
    for scheme, trace in ctx.traces.items():
        ctx.sections.setdefault("_columns", {})[scheme] = {k: v[: len(trace)].tolist() for k, v in columns.items()}

    ko = ctx.traces.get(SchemeId.KO.value)
    if ko is not None:
        bad = an.exp_bound_violation(ko.errors, bs)
        ctx.check("KO error below exponential bound", bad is None,
                  f"{ko.steps} steps" if bad is None else f"violated at n={bad}")
        steps_bad = an.ko_step_bound_violations(ko, delta)
        ctx.check("KO per-step contraction bound", not steps_bad,
                  "every step" if not steps_bad else f"violated at n={steps_bad[:5]}")

    a = problem.affine
    scalar_nonneg = a is not None and problem.dimension == 1 and a.matrix[0, 0] >= 0
    src = cfg.bounds.tightness_source
    if scalar_nonneg and ctx.schedule.is_constant and bs.b_n is not None and src != "none":
        steps = cfg.bounds.tightness_steps
        tight = an.theoretical_bounds(e0, delta, ctx.schedule, steps + 1)
        if src == "exact":
            ko_err = ctx.exact_errors(SchemeId.KO, steps + 1)
            cr_err = ctx.exact_errors(SchemeId.CR, steps + 1)
        else:
            ko_err = ctx.run(SchemeId.KO, steps + 1, None).errors
            cr_err = ctx.run(SchemeId.CR, steps + 1, None).errors
        ko_mis = an.relative_mismatch(ko_err[1:], tight.b_n)
        cr_mis = an.relative_mismatch(cr_err[1:], tight.a_n)
        section["tightness"] = {"source": src, "steps": steps, "ko_vs_b_n": ko_mis, "cr_vs_a_n": cr_mis}
        rtol = cfg.bounds.tightness_rtol
        ctx.check(f"KO error equals b_n ({src}, n<={steps})", ko_mis <= rtol, f"max rel err {ko_mis:.3e}")
        ctx.check(f"CR error equals a_n ({src}, n<={steps})", cr_mis <= rtol, f"max rel err {cr_mis:.3e}")
    ctx.sections["bounds"] = section


def _theta(ctx: _Context) -> None:
    spec = ctx.cfg.theta
    delta = ctx.problem.delta
    lows = ctx.schedule.lower_bounds()
    tr = an.theta_ratio_test(delta, lows)
    section: dict = {"ratio": tr.ratio, "exact": str(tr.exact), "passes": tr.passes}
    n_terms = max(spec.within + 1, 2)
    bs = an.theoretical_bounds(1.0, delta, ctx.schedule, n_terms)
    theta = bs.theta_n
    if spec.expected_step_ratio is not None:
        target = float(Fraction(spec.expected_step_ratio))
        positive = theta > 0
        steps = theta[1:][positive[:-1] & positive[1:]] / theta[:-1][positive[:-1] & positive[1:]]
        worst = float(np.max(np.abs(steps - target))) if steps.size else float("inf")
        section["step_ratio_max_dev"] = worst
        ctx.check(f"theta_(n+1)/theta_n = {spec.expected_step_ratio}", worst <= spec.ratio_atol,
                  f"max deviation {worst:.3e}")
    if spec.below is not None:
        hits = np.flatnonzero(theta < spec.below)
        first = int(hits[0]) if hits.size else None
        section["first_below"] = first
        ctx.check(f"theta_n < {spec.below:g} for some n <= {spec.within}", first is not None,
                  f"first n={first}")
    if spec.grid_deltas:
        rows = []
        for d, a1, (a2, a3) in product(spec.grid_deltas, spec.grid_alpha1, spec.grid_alpha23):
            t = an.theta_ratio_test(d, (a1, a2, a3))
            rows.append({"delta": d, "alpha": [a1, a2, a3], "ratio": t.ratio, "passes": t.passes})
        inner = [r for r in rows if r["alpha"][0] < 1.0]
        ok = all(r["passes"] for r in inner)
        ctx.check(f"theta ratio < 1 on {len(inner)} grid points with alpha1 < 1", ok,
                  f"max ratio {max(r['ratio'] for r in inner):.6f}" if inner else "empty grid")
        edge = []
        for d, (a2, a3) in product(spec.grid_deltas, spec.grid_alpha23):
            t = an.theta_ratio_test(d, (1.0, a2, a3))
            edge.append({"delta": d, "alpha": [1.0, a2, a3], "ratio": t.ratio, "exact": str(t.exact)})
        ctx.check("theta ratio = 1 exactly at alpha1 = 1", all(e["exact"] == "1" for e in edge),
                  f"{len(edge)} boundary points")
        section["grid"] = rows
        section["boundary"] = edge
    ctx.sections["theta"] = section


def _rates(ctx: _Context) -> None:
    spec = ctx.cfg.rates
    first, second = SchemeId.parse(spec.first), SchemeId.parse(spec.second)
    source = spec.source
    if source == "auto":
        source = "exact" if ctx.exact_ok else "float"
    if source == "exact":
        err_a = ctx.exact_errors(first, spec.steps)
        err_b = ctx.exact_errors(second, spec.steps)
    else:
        err_a = ctx.run(first, spec.steps, None).errors
        err_b = ctx.run(second, spec.steps, None).errors
    report = an.compare_rates(err_a, err_b, spec.lower, spec.upper, first.value, second.value)

    bound_ratios = None
    if {first, second} == {SchemeId.CR, SchemeId.KO} and all(ctx.schedule.bounded_below()):
        bs = an.theoretical_bounds(1.0, ctx.problem.delta, ctx.schedule, spec.steps + 1)
        bound_ratios = bs.theta_n if first is SchemeId.CR else 1.0 / bs.theta_n
    notes = report.notes + an.rate_direction_notes(report)
    report = an.RateReport(report.ratios, report.estimated_limit, report.classification,
                           report.first, report.second, bound_ratios, notes)
    section = report.to_dict()
    section["source"] = source
    ctx.sections["rates"] = section
    if spec.expect_classification is not None:
        ctx.check(f"rate classification {first} vs {second}", report.classification == spec.expect_classification,
                  f"got {report.classification}, l={report.estimated_limit:.3e}")
    if spec.expect_limit_at_most is not None:
        ctx.check(f"estimated limit <= {spec.expect_limit_at_most:g}",
                  report.estimated_limit <= spec.expect_limit_at_most, f"l={report.estimated_limit:.3e}")


def _equivalence(ctx: _Context) -> None:
    spec = ctx.cfg.equivalence
    ko = ctx.run(SchemeId.KO, spec.within, None)
    cr = ctx.run(SchemeId.CR, spec.within, None)
    rep = an.equivalence_gap(ko, cr, ctx.problem)
    ctx.equivalence = rep
    settle = rep.settles_below(spec.gap_below)
    ctx.sections["equivalence"] = {
        "gaps": rep.gaps.tolist(),
        "settles_below_at": settle,
        "ko_recurrence_violation": rep.ko_recurrence_violation,
        "cr_recurrence_violation": rep.cr_recurrence_violation,
    }
    ctx.check(f"||p_n - u_n|| < {spec.gap_below:g} within {spec.within} steps", settle is not None,
              f"from n={settle}")
    for label, bad in (("KO", rep.ko_recurrence_violation), ("CR", rep.cr_recurrence_violation)):
        ctx.check(f"{label}-driven gap recurrence", bad is None,
                  f"holds on {len(rep.gaps) - 1} steps" if bad is None else f"violated at n={bad}")


def _datadep(ctx: _Context) -> None:
    spec = ctx.cfg.datadep
    main = data_dependence_experiment(ctx.problem, ctx.perturbation, ctx.schedule, ctx.cfg.x0, max_n=spec.max_n)
    ctx.datadep_main = main
    section: dict = {"experiment": main.to_dict()}
    ctx.check("fixed-point gap within 5 eps/(1-delta)", main.margin >= 0.0, f"margin {main.margin:.6g}")
    ctx.check("per-step perturbed gap recurrence", main.recurrence_violation is None,
              f"max excess {main.recurrence_max_excess:.3e}")
    if main.analytic_gap is not None:
        dev = abs(main.observed_gap - main.analytic_gap)
        ctx.check("gap equals closed form", dev <= spec.analytic_atol, f"deviation {dev:.3e}")

    if spec.batch_seeds:
        seeds = range(ctx.cfg.seed, ctx.cfg.seed + spec.batch_seeds)
        reports = data_dependence_batch(seeds, spec.batch_epsilons, spec.batch_deltas, max_n=spec.max_n)
        section["batch"] = [r.to_dict() for r in reports]
        ctx.check(f"batch of {len(reports)}: gap within bound", all(r.margin >= 0 for r in reports),
                  f"min margin {min(r.margin for r in reports):.6g}")
        ctx.check(f"batch of {len(reports)}: per-step recurrence", all(r.recurrence_violation is None for r in reports),
                  f"max excess {max(r.recurrence_max_excess for r in reports):.3e}")
        ctx.check(f"batch of {len(reports)}: perturbed runs converged", all(r.converged for r in reports),
                  f"max steps {max(r.steps for r in reports)}")
    if spec.batch_constant_shift:
        rows = []
        for eps, a in product(spec.batch_epsilons, spec.batch_deltas):
            problem = scalar_affine(a, 1.0)
            pert = PerturbationSpec(eps, "constant_shift", (eps,))
            r = data_dependence_experiment(problem, pert, ctx.schedule, [ctx.cfg.x0[0]], max_n=spec.max_n)
            closed = eps / (1.0 - a)
            rows.append({**r.to_dict(), "closed_form_gap": closed, "deviation": abs(r.observed_gap - closed)})
        section["constant_shift"] = rows
        worst = max(r["deviation"] for r in rows)
        ctx.check(f"constant shifts: gap = eps/(1-a) on {len(rows)} cases", worst <= spec.analytic_atol,
                  f"max deviation {worst:.3e}")
        ctx.check("constant shifts: gap within 5 eps/(1-delta)", all(r["margin"] >= 0 for r in rows))
    ctx.sections["datadep"] = section


def _lemmas(ctx: _Context) -> None:
    spec = ctx.cfg.lemmas
    section: dict = {}
    if ctx.equivalence is not None:
        rep = ctx.equivalence
        res = an.lemma_recurrence_check(
            an.LemmaRecurrence("lemma1", rep.gaps, rep.eta, rep.rho),
            tolerance=spec.tolerance,
            divergence_threshold=spec.divergence_threshold,
        )
        section["lemma1"] = {"hypotheses_hold": res.hypotheses_hold, "conclusion_holds": res.conclusion_holds,
                             **res.details, "note": res.note}
        ctx.check("lemma1 on KO/CR gaps: hypotheses", res.hypotheses_hold, str(res.details))
        ctx.check("lemma1 on KO/CR gaps: conclusion", res.conclusion_holds, res.note)
    if ctx.datadep_main is not None:
        main = ctx.datadep_main
        if len(main.gaps) >= 16:
            a1 = np.array([ctx.schedule(n)[0] for n in range(len(main.gaps))])
            mu = a1 * (1.0 - main.delta)
            res = an.lemma_recurrence_check(
                an.LemmaRecurrence("lemma2", main.gaps, mu, np.full(len(mu), main.bound)),
                tolerance=spec.tolerance,
                divergence_threshold=spec.divergence_threshold,
            )
            section["lemma2"] = {"hypotheses_hold": res.hypotheses_hold, "conclusion_holds": res.conclusion_holds,
                                 **res.details, "note": res.note}
            ctx.check("lemma2 on perturbed gaps: hypotheses", res.hypotheses_hold, str(res.details))
            ctx.check("lemma2 on perturbed gaps: conclusion", res.conclusion_holds, res.note)
    if not section:
        raise ConfigError("the lemmas analysis needs 'equivalence' or 'datadep' in analyses")
    ctx.sections["lemmas"] = section


def _oracle(ctx: _Context) -> None:
    spec = ctx.cfg.oracle
    rows = {}
    for name, trace in ctx.traces.items():
        scheme = SchemeId.parse(name)
        if spec.steps is not None:
            trace = ctx.run(scheme, spec.steps, None)
        exact = exact_run(ctx.problem_for(scheme), scheme, ctx.schedule, ctx.cfg.x0, trace.steps)
        cmp = compare_traces(trace, exact, spec.abs_tol)
        rows[name] = {"max_abs_gap": cmp.max_abs_gap, "worst_index": cmp.worst_index, "steps": trace.steps}
        ctx.check(f"{name} matches exact trace", cmp.passed,
                  f"max gap {cmp.max_abs_gap:.3e} at n={cmp.worst_index} over {trace.steps} steps")
    ctx.sections["oracle"] = rows


REDUCTIONS = (
    ("Noor(a2=a3=0) == Mann", SchemeId.NOOR, lambda a: (a[0], 0.0, 0.0), SchemeId.MANN, lambda a: (a[0], 0.0, 0.0), 1),
    ("Noor(a3=0) == Ishikawa", SchemeId.NOOR, lambda a: (a[0], a[1], 0.0), SchemeId.ISHIKAWA, lambda a: (a[0], a[1], 0.0), 1),
    ("SP(a3=0) == TwoStepMann", SchemeId.SP, lambda a: (a[0], a[1], 0.0), SchemeId.TWO_STEP_MANN, lambda a: (a[0], a[1], 0.0), 1),
    ("S(a2=0) == Picard", SchemeId.S, lambda a: (a[0], 0.0, 0.0), SchemeId.PICARD, lambda a: a, 1),
    ("CR(0,0,0) == Picard", SchemeId.CR, lambda a: (0.0, 0.0, 0.0), SchemeId.PICARD, lambda a: a, 1),
    ("KO(a1=0) == Picard", SchemeId.KO, lambda a: (0.0, a[1], a[2]), SchemeId.PICARD, lambda a: a, 1),
    ("KO(1,1,1) == T^3", SchemeId.KO, lambda a: (1.0, 1.0, 1.0), SchemeId.PICARD, lambda a: a, 3),
)


def reduction_identities(problem: ContractionProblem, starts, schedules, steps: int) -> list[dict]:
    """Run each degenerate scheme against the scheme it reduces to and compare bit for bit."""
    rows = []
    for label, lhs, lhs_a, rhs, rhs_a, stride in REDUCTIONS:
        mismatches = []
        for x0, alphas in product(starts, schedules):
            left = run_scheme(problem, lhs, ControlSchedule.constant(*lhs_a(alphas)), x0, steps, None)
            right = run_scheme(problem, rhs, ControlSchedule.constant(*rhs_a(alphas)), x0, steps * stride, None)
            if not np.array_equal(left.iterates, right.iterates[::stride]):
                mismatches.append({"x0": list(x0), "alphas": list(alphas)})
        rows.append({"identity": label, "cases": len(starts) * len(schedules), "mismatches": mismatches})
    return rows


def _reductions(ctx: _Context) -> None:
    spec = ctx.cfg.reductions
    rows = reduction_identities(ctx.problem, spec.starts, spec.schedules, spec.steps)
    for row in rows:
        ctx.check(f"{row['identity']} (bit-exact)", not row["mismatches"],
                  f"{row['cases']} cases x {spec.steps} steps")
    ctx.sections["reductions"] = rows


ANALYSES = {
    "bounds": _bounds,
    "theta": _theta,
    "rates": _rates,
    "equivalence": _equivalence,
    "datadep": _datadep,
    "lemmas": _lemmas,
    "oracle": _oracle,
    "reductions": _reductions,
}
# lemmas consume the equivalence and datadep results
ORDER = ["bounds", "theta", "rates", "equivalence", "datadep", "lemmas", "oracle", "reductions"]


def _expectations(ctx: _Context) -> None:
    exp = ctx.cfg.expect
    for name, steps in exp.termination.items():
        scheme = SchemeId.parse(name).value
        trace = ctx.traces.get(scheme)
        got = None if trace is None else trace.steps
        ok = trace is not None and trace.termination == "reached_tolerance" and got == steps
        ctx.check(f"{scheme} terminates at n={steps}", ok, f"got n={got}")
    if exp.all_converged:
        tol = ctx.cfg.tolerance
        for name, trace in ctx.traces.items():
            last = trace.errors[-1] if trace.errors is not None else trace.residuals[-1]
            ctx.check(f"{name} reaches tolerance within {ctx.cfg.stop.max_n} steps",
                      trace.termination == "reached_tolerance" and (tol is None or last <= tol),
                      f"n={trace.steps}, final error {last:.3e}")


def output_directory(cfg: ExperimentConfig, output_root: str | Path | None = None) -> Path:
    if cfg.output.directory and output_root is None:
        return Path(cfg.output.directory)
    root = output_root or os.environ.get(OUTPUT_ROOT_ENV) or "runs"
    return Path(root) / cfg.name


def execute(cfg: ExperimentConfig, directory: Path) -> ReportBundle:
    """Run everything a config asks for and return the (unwritten) bundle."""
    ctx = _Context(cfg)
    _gate(cfg, ctx.problem, ctx.schedule)
    schemes = [SchemeId.parse(s) for s in cfg.schemes]
    with ThreadPoolExecutor(max_workers=min(MAX_WORKERS, len(schemes))) as pool:
        # map() yields in submission order, so assembly is deterministic
        traces = list(pool.map(lambda s: ctx.run(s, tolerance=cfg.tolerance), schemes))
    ctx.traces = {t.scheme.value: t for t in traces}

    for name in ORDER:
        if name in cfg.analyses:
            ANALYSES[name](ctx)
    _expectations(ctx)

    columns = ctx.sections.pop("_columns", {})
    payloads = {}
    for name, trace in ctx.traces.items():
        p = _trace_payload(trace, ctx.problem_for(trace.scheme))
        p["columns"] = columns.get(name, {})
        payloads[name] = p
    problem_info = {
        "name": ctx.problem.name,
        "dimension": ctx.problem.dimension,
        "delta": ctx.problem.delta,
        "fixed_point": ctx.problem.known_fixed_point.tolist(),
    }
    if ctx.approx is not None and ctx.approx.known_fixed_point is not None:
        problem_info["perturbed_fixed_point"] = ctx.approx.known_fixed_point.tolist()
    return ReportBundle(cfg.name, directory, cfg.model_dump(mode="json"), problem_info, payloads,
                        ctx.sections, ctx.checks)


def run_config(path, output_root=None, seed: int | None = None, write: bool = True) -> ReportBundle:
    """Load, execute and persist one config.

    Raises ConfigError (exit 2), InadmissibleError (3), CheckFailed (4, after
    the bundle is written), NumericFault (5) or OutputError (6).
    """
    from .report import write_bundle

    cfg = load_config(path, seed=seed)
    bundle = execute(cfg, output_directory(cfg, output_root))
    if write:
        write_bundle(bundle, cfg.output.formats)
    if not bundle.passed:
        raise CheckFailed(bundle)
    return bundle
