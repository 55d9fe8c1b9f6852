"""Acceptance criteria, each at its stated tolerance.

Expected values come from independent oracles (exact rational arithmetic in
this file) rather than from the library's own formulas wherever possible.
"""

import io
import itertools
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from fprates.analysis import (
    LemmaRecurrence,
    compare_rates,
    equivalence_gap,
    error_sequence,
    lemma_recurrence_check,
    rate_direction_notes,
    theoretical_bounds,
    theta_ratio_test,
)
from fprates.core import ControlSchedule, make_affine_contraction, scalar_affine, standard_problem
from fprates.datadep import PerturbationSpec, data_dependence_batch, data_dependence_experiment
from fprates.harness.cli import verify
from fprates.harness.runner import reduction_identities
from fprates.oracle import compare_traces, exact_run
from fprates.schemes import SchemeId, run_scheme

HALF = ControlSchedule.constant(0.5, 0.5, 0.5)
ALL_SCHEMES = list(SchemeId)


def exact_bn(e0, d, a1, a2, a3, n):
    e0, d, a1, a2, a3 = map(F, (e0, d, a1, a2, a3))
    return e0 * d ** (n + 1) * (1 - a1 * (1 - d * (1 - a2 * a3 * (1 - d)))) ** (n + 1)


def exact_an(e0, d, a1, a2, a3, n):
    e0, d, a1, a2, a3 = map(F, (e0, d, a1, a2, a3))
    return e0 * d ** (n + 1) * (1 - a1 * (1 - d)) ** (n + 1) * (1 - a2 * a3 * (1 - d)) ** (n + 1)


def rel(x, ref):
    return float(abs(F(float(x)) - ref) / ref)


def test_c1_convergence(criterion):
    from fprates.datadep import make_approximate_operator

    p = standard_problem()
    approx = make_approximate_operator(p, PerturbationSpec(0.1, shift=(0.0,)))
    steps = {}
    for s in ALL_SCHEMES:
        t = run_scheme(approx if s is SchemeId.KO_PERTURBED else p, s, HALF, [0.0], max_n=200, tolerance=1e-10)
        if t.errors[-1] < 1e-10:
            steps[s.value] = t.steps
    # geometric solve: e_n = 2 (23/64)^n, smallest n with e_n <= 1e-10
    ko_n = math.ceil(math.log(1e-10 / 2) / math.log(23 / 64))
    ok = len(steps) == 10 and steps["KO"] == ko_n == 24
    assert criterion("1 convergence", ok, f"{len(steps)}/10 converged, KO n={steps.get('KO')}")


def test_c2_exponential_bound(criterion):
    worst = -math.inf
    for a in (0.5, 0.3, 0.9):
        p = scalar_affine(a, 1.0)
        t = run_scheme(p, "KO", HALF, [0.0], max_n=101, tolerance=None)
        e = error_sequence(t)
        e0 = float(e[0])
        # oracle: exp_bound_n = e0 exp(-(1 - delta) (n + 1) / 2) for constant alpha1 = 1/2
        oracle = np.array([e0 * math.exp(-(1 - a) * 0.5 * (n + 1)) for n in range(101)])
        lib = theoretical_bounds(e0, a, HALF, 101).exp_bound
        np.testing.assert_allclose(lib, oracle, rtol=1e-14)
        worst = max(worst, float(np.max(e[1:102] - oracle)))
    assert criterion("2 exponential bound", worst <= 1e-12, f"max e_(n+1) - bound = {worst:.3e}")


def test_c3_tightness(criterion):
    worst = 0.0
    cases = [(0.5, 1.0, 0.0, (0.5, 0.5, 0.5)), (0.3, 1.0, 0.0, (0.5, 0.5, 0.5)),
             (0.9, 1.0, 0.0, (0.5, 0.5, 0.5)), (0.7, -2.0, 4.0, (0.6, 0.3, 0.8))]
    for a, b, x0, al in cases:
        p = scalar_affine(a, b)
        for scheme, closed in (("KO", exact_bn), ("CR", exact_an)):
            errs = exact_run(p, scheme, al, [x0], 51).errors()
            e0 = abs(F(x0) - F(b) / (1 - F(a)))
            bounds = theoretical_bounds(float(e0), a, al, 51)
            lib = bounds.b_n if scheme == "KO" else bounds.a_n
            for n in range(51):
                ref = closed(e0, a, *al, n)
                worst = max(worst, rel(errs[n + 1], ref), rel(lib[n], ref))
    # floating run with x* = 0, where no cancellation occurs
    p = scalar_affine(0.7, 0.0)
    al = (0.6, 0.3, 0.8)
    for scheme, closed in (("KO", exact_bn), ("CR", exact_an)):
        e = run_scheme(p, scheme, ControlSchedule.constant(*al), [3.0], 51, None).errors
        for n in range(51):
            worst = max(worst, rel(e[n + 1], closed(3, 0.7, *al, n)))
    assert criterion("3 bound tightness", worst <= 1e-12, f"max relative error {worst:.3e}")


def test_c4_theta(criterion):
    r = theta_ratio_test(0.5, (0.5, 0.5, 0.5))
    ok_std = abs(r.ratio - 21 / 23) <= 1e-12 and r.exact == F(21, 23)
    theta = theoretical_bounds(2.0, 0.5, HALF, 201).theta_n
    ok_small = bool(np.any(theta < 1e-6))
    grid = list(itertools.product((0.3, 0.5, 0.9), (0.25, 0.5, 0.75), (0.2, 0.6, 1.0)))
    assert len(grid) == 27
    ok_grid = all(theta_ratio_test(d, (a1, a23, a23)).exact < 1 for d, a1, a23 in grid)
    ok_one = all(theta_ratio_test(d, (1.0, a2, a3)).exact == 1 for d in (0.3, 0.5, 0.9) for a2 in (0.2, 1.0)
                 for a3 in (0.4, 1.0))
    ok = ok_std and ok_small and ok_grid and ok_one
    assert criterion("4 theta ratio", ok, f"ratio {r.ratio!r}, min theta {theta.min():.2e}")


def test_c5_equivalence(criterion):
    p = standard_problem()
    ko = run_scheme(p, "KO", HALF, [0.0], 200, None)
    cr = run_scheme(p, "CR", HALF, [0.0], 200, None)
    rep = equivalence_gap(ko, cr, p)
    settled = rep.settles_below(1e-10)
    # independent evaluation of the KO-driven recurrence
    d = 0.5
    g = np.abs(ko.iterates[:, 0] - cr.iterates[:, 0])
    pe = np.abs(ko.iterates[:, 0] - 2.0)
    rhs = (1 - 0.5 * (1 - d)) * g[:-1] + 0.5 * (2 + 0.5 * d * 0.5) * (1 + d) * pe[:-1]
    rec_ok = bool(np.all(g[1:] <= rhs + 1e-12)) and rep.recurrences_hold
    lem = lemma_recurrence_check(LemmaRecurrence("lemma1", rep.gaps, rep.eta, rep.rho))
    ok = settled is not None and settled <= 200 and rec_ok and lem.hypotheses_hold and lem.conclusion_holds
    assert criterion("5 KO/CR equivalence", ok, f"gap < 1e-10 from n={settled}")


def test_c6_data_dependence(criterion):
    reports = data_dependence_batch(range(20), epsilons=(0.01, 0.1), deltas=(0.3, 0.5, 0.9))
    margins_ok = len(reports) >= 100 and all(r.observed_gap <= 5 * r.epsilon / (1 - r.delta) and r.margin >= 0
                                             for r in reports)
    rec_ok = all(r.recurrence_violation is None and r.recurrence_max_excess <= 1e-12 for r in reports)
    worst = 0.0
    for eps, a, c in itertools.product((0.01, 0.1), (0.3, 0.5, 0.9), (1.0, -0.5)):
        shift = c * eps
        r = data_dependence_experiment(scalar_affine(a, 1.0), PerturbationSpec(eps, shift=(shift,)), HALF, [0.0])
        closed = float(abs(F(shift)) / (1 - F(a)))
        worst = max(worst, abs(r.observed_gap - closed))
        margins_ok &= r.margin >= 0
    ok = margins_ok and rec_ok and worst <= 1e-12
    assert criterion("6 data dependence", ok, f"{len(reports)} seeded runs, max shift deviation {worst:.3e}")


def test_c7_oracle(criterion):
    from fprates.datadep import make_approximate_operator

    p = standard_problem()
    worst = 0.0
    for s in ALL_SCHEMES:
        prob = make_approximate_operator(p, PerturbationSpec(0.1, shift=(0.1,))) if s is SchemeId.KO_PERTURBED else p
        ft = run_scheme(prob, s, HALF, [0.0], 50, None)
        if s is SchemeId.KO_PERTURBED:
            # KO on the shifted affine map is the exact counterpart of the perturbed run
            exact = exact_run(prob, "KO", HALF, [0.0], 50)
            gap = float(np.max(np.abs(ft.iterates - exact.as_floats())))
        else:
            gap = compare_traces(ft, exact_run(p, s, HALF, [0.0], 50)).max_abs_gap
        worst = max(worst, gap)
    assert criterion("7 exact oracle", worst <= 1e-12, f"max abs gap {worst:.3e}")


def test_c8_reductions(criterion):
    p = standard_problem()
    rows = reduction_identities(p, [[0.0], [-3.5], [17.25]], [(0.5, 0.5, 0.5), (0.3, 0.7, 0.9), (0.9, 0.1, 0.6)], 50)
    ok = len(rows) == 7 and all(not r["mismatches"] for r in rows)
    # direct spot check of KO(1,1,1) = T^3 by hand
    t = run_scheme(p, "KO", ControlSchedule.constant(1, 1, 1), [0.0], 50, None)
    x = 0.0
    for n in range(51):
        ok &= t.iterates[n, 0] == x
        x = 0.5 * (0.5 * (0.5 * x + 1) + 1) + 1
    assert criterion("8 reduction identities", ok, f"{sum(not r['mismatches'] for r in rows)}/7 identical")


def test_c9_rate_direction(criterion):
    p = standard_problem()
    n = 200
    cr = exact_run(p, "CR", HALF, [0.0], n).errors()
    ko = exact_run(p, "KO", HALF, [0.0], n).errors()
    r = compare_rates(cr, ko, first="CR", second="KO")
    bounds = theoretical_bounds(2.0, 0.5, HALF, n)
    notes = rate_direction_notes(r)
    # oracle: the error ratio is (21/23)^n exactly
    expected = float(F(21, 23) ** (n - n // 8))
    ok = (r.classification == "first_faster" and r.estimated_limit <= 0.01
          and bounds.theta_n is not None and len(r.ratios) > 0
          and any("conflict" in s for s in notes)
          and r.estimated_limit == pytest.approx(expected, rel=0.5))
    assert criterion("9 rate direction", ok, f"l = {r.estimated_limit:.3e}, {r.classification}")


def test_verify_under_ten_seconds(tmp_path, criterion):
    out = io.StringIO()
    start = time.perf_counter()
    ok = verify(str(tmp_path), stream=out)
    elapsed = time.perf_counter() - start
    lines = [ln for ln in out.getvalue().splitlines() if ln.startswith(("PASS", "FAIL"))]
    ok = ok and len(lines) == 9 and elapsed < 10.0
    assert criterion("suite: verify runs all built-in configs in < 10 s", ok, f"{elapsed:.2f} s"), out.getvalue()
