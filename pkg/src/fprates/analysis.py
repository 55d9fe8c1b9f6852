"""Error sequences, rate comparison, closed-form bounds and recurrence validators.

Limits cannot be observed from finite runs. Wherever a statement is about
n -> infinity, the checks here look at the tail (last quarter) of the
recorded data and report the outcome as numeric evidence only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from .core import ContractionProblem, ControlSchedule, norm
from .schemes import IterationTrace, SchemeId

RECURRENCE_SLACK = 1e-12
UNDERFLOW_FLOOR = 1e-300

Classification = Literal["first_faster", "same_rate", "second_faster", "inconclusive"]


def tail(values: Sequence, fraction: float = 0.25) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    k = max(1, int(math.ceil(len(arr) * fraction)))
    return arr[-k:]


def error_sequence(trace: IterationTrace, x_star=None) -> np.ndarray:
    if x_star is None:
        x_star = trace.fixed_point
    if x_star is None:
        raise ValueError(f"{trace.scheme}: no fixed point available to measure errors against")
    x_star = np.asarray(x_star, dtype=np.float64).reshape(-1)
    if x_star.size != trace.iterates.shape[1]:
        raise ValueError(f"fixed point has dimension {x_star.size}, trace has {trace.iterates.shape[1]}")
    return np.linalg.norm(trace.iterates - x_star, axis=1)


# ---------------------------------------------------------------------------
# rate comparison


@dataclass(frozen=True)
class RateReport:
    ratios: np.ndarray
    estimated_limit: float
    classification: Classification
    first: str = "A"
    second: str = "B"
    bound_ratios: np.ndarray | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {
            "first": self.first,
            "second": self.second,
            "estimated_limit": self.estimated_limit,
            "classification": self.classification,
            "empirical_ratios": [float(r) for r in self.ratios],
            "notes": list(self.notes),
        }
        if self.bound_ratios is not None:
            out["bound_ratios"] = [float(r) for r in self.bound_ratios]
        return out


def compare_rates(
    err_a: Sequence[float],
    err_b: Sequence[float],
    lower: float = 0.01,
    upper: float = 100.0,
    first: str = "A",
    second: str = "B",
) -> RateReport:
    """Estimate l = lim errA_n / errB_n and classify which sequence is faster.

    Ratios are cut at the first denominator below 1e-300; l is the median of
    the last quarter of the remaining ratios.
    """
    a = np.asarray(err_a, dtype=np.float64)
    b = np.asarray(err_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"error sequences differ in length: {a.size} vs {b.size}")
    if a.size < 8:
        raise ValueError("rate comparison needs at least 8 terms")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("errors must be nonnegative")

    underflow = np.flatnonzero(b < UNDERFLOW_FLOOR)
    valid = int(underflow[0]) if underflow.size else b.size
    ratios = a[:valid] / b[:valid]
    if valid == 0:
        return RateReport(ratios, math.nan, "inconclusive", first, second,
                          notes=("every denominator underflows; no ratio available",))

    limit = float(np.median(tail(ratios)))
    if limit < lower:
        cls: Classification = "first_faster"
    elif limit > upper:
        cls = "second_faster"
    else:
        cls = "same_rate"
    notes = ()
    if valid < b.size:
        notes = (f"ratios truncated at n={valid} where the denominator falls below {UNDERFLOW_FLOOR:g}",)
    return RateReport(ratios, limit, cls, first, second, notes=notes)


# ---------------------------------------------------------------------------
# closed-form bounds


@dataclass(frozen=True)
class BoundSequences:
    """Per-step bounds; index n of each array bounds the error at step n + 1."""

    exp_bound: np.ndarray
    b_n: np.ndarray | None
    a_n: np.ndarray | None
    theta_n: np.ndarray | None
    theta_step_ratio: float | None


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")


def ko_factor(delta: float, a1: float, a2: float, a3: float) -> float:
    """Per-step KO contraction factor delta * [1 - a1 (1 - delta (1 - a2 a3 (1 - delta)))]."""
    return delta * (1.0 - a1 * (1.0 - delta * (1.0 - a2 * a3 * (1.0 - delta))))


def cr_factor(delta: float, a1: float, a2: float, a3: float) -> float:
    """Per-step CR contraction factor delta * [1 - a1 (1 - delta)] [1 - a2 a3 (1 - delta)]."""
    return delta * (1.0 - a1 * (1.0 - delta)) * (1.0 - a2 * a3 * (1.0 - delta))


def theoretical_bounds(
    e0: float,
    delta: float,
    alphas: ControlSchedule | Sequence[float],
    n_terms: int,
) -> BoundSequences:
    """Evaluate the exponential bound and the KO/CR closed forms for n < n_terms.

    ``alphas`` is either a schedule or three constants. The exponential
    bound uses the schedule's exact partial sums; the KO/CR forms use its
    lower bounds and are omitted when any lower bound is zero.
    """
    _check_delta(delta)
    schedule = alphas if isinstance(alphas, ControlSchedule) else ControlSchedule("constant", tuple(alphas))
    n = np.arange(n_terms)
    partial = np.array([schedule.partial_sum(k) for k in range(n_terms)])
    exp_bound = e0 / np.exp((1.0 - delta) * partial)

    a1, a2, a3 = schedule.lower_bounds()
    if min(a1, a2, a3) <= 0.0:
        return BoundSequences(exp_bound, None, None, None, None)
    b_br = 1.0 - a1 * (1.0 - delta * (1.0 - a2 * a3 * (1.0 - delta)))
    a_br1 = 1.0 - a1 * (1.0 - delta)
    a_br2 = 1.0 - a2 * a3 * (1.0 - delta)
    p = n + 1
    b_n = e0 * delta**p * b_br**p
    a_n = e0 * delta**p * a_br1**p * a_br2**p
    theta = (a_br1**p * a_br2**p) / b_br**p
    return BoundSequences(exp_bound, b_n, a_n, theta, theta_ratio_test(delta, (a1, a2, a3)).ratio)


@dataclass(frozen=True)
class ThetaRatio:
    ratio: float
    passes: bool
    exact: Fraction


def theta_ratio_test(delta: float, alphas: Sequence[float]) -> ThetaRatio:
    """theta_{n+1}/theta_n = [1-a1(1-d)][1-a2 a3(1-d)] / [1-a1(1-d(1-a2 a3(1-d)))].

    Evaluated exactly on the binary values of the inputs, so the boundary
    case a1 = 1 gives a ratio of exactly 1.
    """
    _check_delta(delta)
    a1, a2, a3 = (float(a) for a in alphas)
    if not all(0.0 < a <= 1.0 for a in (a1, a2, a3)):
        raise ValueError(f"controls must lie in (0, 1], got {(a1, a2, a3)}")
    d, q1, q2, q3 = (Fraction(v) for v in (delta, a1, a2, a3))
    num = (1 - q1 * (1 - d)) * (1 - q2 * q3 * (1 - d))
    den = 1 - q1 * (1 - d * (1 - q2 * q3 * (1 - d)))
    if den <= 0:
        raise ArithmeticError(f"theta denominator {den} is not positive for delta={delta}, alphas={alphas}")
    ratio = num / den
    return ThetaRatio(float(ratio), ratio < 1, ratio)


def first_violation(lhs: np.ndarray, rhs: np.ndarray, slack: float = RECURRENCE_SLACK) -> int | None:
    bad = np.flatnonzero(np.asarray(lhs) > np.asarray(rhs) + slack)
    return int(bad[0]) if bad.size else None


def exp_bound_violation(errors: np.ndarray, bounds: BoundSequences, slack: float = RECURRENCE_SLACK) -> int | None:
    """First n >= 1 with e_n > exp_bound_{n-1} + slack, else None."""
    m = min(len(errors) - 1, len(bounds.exp_bound))
    bad = first_violation(errors[1:m + 1], bounds.exp_bound[:m], slack)
    return None if bad is None else bad + 1


def relative_mismatch(observed: np.ndarray, predicted: np.ndarray) -> float:
    """max |observed - predicted| / predicted over the common prefix."""
    m = min(len(observed), len(predicted))
    p = np.asarray(predicted[:m], dtype=np.float64)
    return float(np.max(np.abs(np.asarray(observed[:m]) - p) / p)) if m else 0.0


def ko_step_bound_violations(trace: IterationTrace, delta: float, slack: float = RECURRENCE_SLACK) -> list[int]:
    """Steps where e_{n+1} > [1 - a_n^1 (1 - delta)] e_n + slack."""
    errors = error_sequence(trace)
    bad = []
    for n in range(len(errors) - 1):
        a1 = trace.schedule_used(n)[0]
        if errors[n + 1] > (1.0 - a1 * (1.0 - delta)) * errors[n] + slack:
            bad.append(n)
    return bad


# ---------------------------------------------------------------------------
# KO / CR equivalence


@dataclass(frozen=True)
class EquivalenceReport:
    gaps: np.ndarray
    eta: np.ndarray
    rho: np.ndarray
    ko_rhs: np.ndarray  # right side of the KO-driven recurrence for g_{n+1}
    cr_rhs: np.ndarray  # right side of the CR-driven recurrence for g_{n+1}
    ko_recurrence_violation: int | None
    cr_recurrence_violation: int | None

    @property
    def recurrences_hold(self) -> bool:
        return self.ko_recurrence_violation is None and self.cr_recurrence_violation is None

    def settles_below(self, threshold: float) -> int | None:
        """Smallest n with g_m < threshold for every recorded m >= n."""
        above = np.flatnonzero(self.gaps >= threshold)
        if not above.size:
            return 0
        n = int(above[-1]) + 1
        return n if n < len(self.gaps) else None


def equivalence_gap(trace_ko: IterationTrace, trace_cr: IterationTrace, problem: ContractionProblem) -> EquivalenceReport:
    """g_n = ||p_n - u_n|| for KO iterates p_n and CR iterates u_n, plus the
    per-step recurrences bounding g_{n+1} by g_n and the distance of p_n
    (resp. u_n) to the fixed point."""
    if trace_ko.scheme is not SchemeId.KO or trace_cr.scheme is not SchemeId.CR:
        raise ValueError(f"expected a KO and a CR trace, got {trace_ko.scheme} and {trace_cr.scheme}")
    if len(trace_ko) != len(trace_cr):
        raise ValueError(f"runs have different lengths: {len(trace_ko)} vs {len(trace_cr)}")
    if trace_ko.schedule_used != trace_cr.schedule_used:
        raise ValueError("runs used different schedules")
    if not np.array_equal(trace_ko.iterates[0], trace_cr.iterates[0]):
        raise ValueError("runs start from different points")

    delta = problem.delta
    x_star = problem.known_fixed_point
    gaps = np.linalg.norm(trace_ko.iterates - trace_cr.iterates, axis=1)
    p_err = error_sequence(trace_ko, x_star)
    u_err = error_sequence(trace_cr, x_star)
    alphas = np.array([trace_ko.schedule_used(n) for n in range(len(gaps))])
    a1, a2, a3 = alphas[:, 0], alphas[:, 1], alphas[:, 2]

    eta = a1 * (1.0 - delta)
    rho = (1.0 - a1) * (2.0 + a2 * delta * a3) * (1.0 + delta) * p_err
    ko_rhs = (1.0 - eta) * gaps + rho
    cr_rhs = (1.0 - eta) * gaps + (1.0 - a1) * a2 * delta * a3 * (1.0 + delta) * u_err

    return EquivalenceReport(
        gaps=gaps,
        eta=eta,
        rho=rho,
        ko_rhs=ko_rhs,
        cr_rhs=cr_rhs,
        ko_recurrence_violation=first_violation(gaps[1:], ko_rhs[:-1]),
        cr_recurrence_violation=first_violation(gaps[1:], cr_rhs[:-1]),
    )


# ---------------------------------------------------------------------------
# recurrence lemmas


@dataclass(frozen=True)
class LemmaRecurrence:
    """a_{n+1} <= (1 - coeff_n) a_n + forcing term.

    The forcing term is ``forcing_n`` for ``lemma1`` and
    ``coeff_n * forcing_n`` for ``lemma2``.
    """

    kind: Literal["lemma1", "lemma2"]
    a: np.ndarray
    coeff: np.ndarray
    forcing: np.ndarray

    def __post_init__(self):
        if self.kind not in ("lemma1", "lemma2"):
            raise ValueError(f"unknown lemma kind {self.kind!r}")
        for name in ("a", "coeff", "forcing"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (len(self.a) == len(self.coeff) == len(self.forcing)):
            raise ValueError("sequences must have equal length")
        if len(self.a) < 16:
            raise ValueError("recurrence checks need at least 16 terms")
        if np.any(self.a < 0) or np.any(self.forcing < 0):
            raise ValueError("negative entries are not allowed")
        if np.any(self.coeff <= 0) or np.any(self.coeff >= 1):
            raise ValueError("coefficients must lie strictly inside (0, 1)")

    def rhs(self) -> np.ndarray:
        forcing = self.forcing if self.kind == "lemma1" else self.coeff * self.forcing
        return (1.0 - self.coeff) * self.a + forcing


@dataclass(frozen=True)
class LemmaCheck:
    hypotheses_hold: bool
    conclusion_holds: bool
    recurrence_violation: int | None
    coeff_partial_sum: float
    details: dict = field(default_factory=dict)
    note: str = "numeric evidence from a finite run, not a proof"


def lemma_recurrence_check(
    r: LemmaRecurrence,
    tolerance: float = 1e-10,
    divergence_threshold: float = 5.0,
    slack: float = RECURRENCE_SLACK,
) -> LemmaCheck:
    """Check the recurrence at every index and the finite stand-ins for the
    lemma's limit statements.

    lemma1: sum of coeff exceeds ``divergence_threshold``, the tail of
    forcing/coeff is below ``tolerance`` and (conclusion) the tail of a is
    below ``tolerance``.
    lemma2: sum of coeff exceeds the threshold and (conclusion) the tail max
    of a is at most the tail max of forcing plus ``tolerance``.
    """
    violation = first_violation(r.a[1:], r.rhs()[:-1], slack)
    coeff_sum = float(math.fsum(r.coeff[:-1]))
    details: dict = {"coeff_partial_sum": coeff_sum}
    hyp = violation is None and coeff_sum >= divergence_threshold
    if r.kind == "lemma1":
        forcing_ratio = float(np.max(tail(r.forcing / r.coeff)))
        details["tail_forcing_over_coeff"] = forcing_ratio
        hyp = hyp and forcing_ratio <= tolerance
        tail_a = float(np.max(tail(r.a)))
        details["tail_max_a"] = tail_a
        concl = tail_a <= tolerance
    else:
        tail_a = float(np.max(tail(r.a)))
        tail_eta = float(np.max(tail(r.forcing)))
        details.update(tail_max_a=tail_a, tail_max_forcing=tail_eta)
        concl = tail_a <= tail_eta + tolerance
    return LemmaCheck(hyp, concl, violation, coeff_sum, details)


def rate_direction_notes(report: RateReport) -> tuple[str, ...]:
    """Explain the measured KO/CR direction next to the two competing readings."""
    pair = {report.first, report.second}
    if pair != {"CR", "KO"}:
        return ()
    faster = {
        "first_faster": report.first,
        "second_faster": report.second,
    }.get(report.classification)
    measured = f"measured: {faster} converges faster" if faster else f"measured: {report.classification}"
    return (
        measured,
        "wording conflict: one statement of the result says CR converges faster than KO, "
        "the formal statement says the KO sequence {p_n} converges faster than the CR sequence {u_n}; "
        "its bound ratio theta_n = a_n/b_n -> 0 supports CR being faster",
    )
