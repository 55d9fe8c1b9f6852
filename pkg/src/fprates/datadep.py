"""Approximate operators and the fixed-point data dependence experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .core import (
    AffineContraction,
    ContractionProblem,
    ControlSchedule,
    affine_fixed_point,
    as_point,
    norm,
    scalar_affine,
)
from .schemes import SchemeId, run_scheme

OFFSET_SLACK = 1e-12
PERTURBED_TOLERANCE = 1e-13
MIN_FIRST_CONTROL = 0.5


class InadmissibleSchedule(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationSpec:
    """Budget ``epsilon`` for sup_x ||T x - T~ x|| and how T~ is built.

    ``constant_shift`` adds the vector ``shift``. ``seeded_bounded`` adds
    eps * u * sin(w . x * freq + phase) with u, w unit vectors and phase
    drawn from ``seed``; freq is chosen so T~ stays a contraction.
    """

    epsilon: float
    mode: Literal["constant_shift", "seeded_bounded"] = "constant_shift"
    shift: tuple[float, ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.mode == "constant_shift":
            if self.shift is None:
                raise ValueError("constant_shift needs a shift vector")
            object.__setattr__(self, "shift", tuple(float(c) for c in self.shift))
            if norm(np.array(self.shift)) > self.epsilon + OFFSET_SLACK:
                raise ValueError(
                    f"shift norm {norm(np.array(self.shift))!r} exceeds epsilon {self.epsilon!r}"
                )
        elif self.mode == "seeded_bounded":
            if self.seed is None:
                raise ValueError("seeded_bounded needs a seed")
        else:
            raise ValueError(f"unknown perturbation mode {self.mode!r}")


@dataclass(frozen=True)
class _SmoothOffset:
    """x -> T(x) + eps * u * sin(freq * <w, x> + phase)."""

    base: object
    epsilon: float
    direction: np.ndarray
    weights: np.ndarray
    freq: float
    phase: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.base(x) + self.epsilon * math.sin(self.freq * float(self.weights @ x) + self.phase) * self.direction


@dataclass(frozen=True)
class _ConstantOffset:
    base: object
    shift: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.base(x) + self.shift


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def make_approximate_operator(problem: ContractionProblem, spec: PerturbationSpec) -> ContractionProblem:
    """Return T~ with ||T x - T~ x|| <= epsilon everywhere, as a new problem.

    For a constant shift on an affine map the perturbed fixed point is known
    exactly, (I - A)^{-1}(b + c).
    """
    d = problem.dimension
    if spec.mode == "constant_shift":
        c = as_point(spec.shift, d)
        affine = None
        fixed = None
        delta = problem.delta
        if problem.affine is not None:
            affine = AffineContraction(problem.affine.matrix, problem.affine.offset + c)
            fixed = affine_fixed_point(problem.affine.matrix, problem.affine.offset + c)
        mapping = _ConstantOffset(problem.map, c)
    else:
        rng = np.random.default_rng(spec.seed)
        direction = _unit(rng, d)
        weights = _unit(rng, d)
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        # the offset is (eps * freq)-Lipschitz; keep T~ a contraction with margin
        slope = float(rng.uniform(0.25, 0.5)) * (1.0 - problem.delta)
        freq = slope / spec.epsilon
        delta = problem.delta + slope
        affine = None
        fixed = None
        mapping = _SmoothOffset(problem.map, spec.epsilon, direction, weights, freq, phase)

    return ContractionProblem(
        map=mapping,
        lipschitz_constant=delta,
        dimension=d,
        known_fixed_point=fixed,
        name=f"{problem.name}~{spec.mode}(eps={spec.epsilon:g})",
        affine=affine,
        perturbation=PerturbationInfo(problem, spec),
    )


@dataclass(frozen=True)
class PerturbationInfo:
    base: ContractionProblem
    spec: PerturbationSpec


def offset_sup(approx: ContractionProblem, n_points: int = 1000, seed: int = 0, scale: float = 10.0) -> float:
    """Sampled sup of ||T x - T~ x|| around the base fixed point."""
    info: PerturbationInfo = approx.perturbation
    base = info.base
    rng = np.random.default_rng(seed)
    center = base.known_fixed_point if base.known_fixed_point is not None else np.zeros(base.dimension)
    worst = 0.0
    for _ in range(n_points):
        x = center + scale * rng.standard_normal(base.dimension)
        worst = max(worst, norm(base.map(x) - approx.map(x)))
    return worst


def data_dependence_bound(epsilon: float, delta: float) -> float:
    return 5.0 * epsilon / (1.0 - delta)


@dataclass(frozen=True)
class DataDependenceReport:
    epsilon: float
    delta: float
    bound: float
    observed_gap: float
    margin: float
    sharp_bound: float  # epsilon / (1 - delta)
    perturbed_fixed_point: np.ndarray
    steps: int
    converged: bool
    recurrence_violation: int | None
    recurrence_max_excess: float
    gaps: np.ndarray = field(repr=False)
    analytic_gap: float | None = None
    mode: str = "constant_shift"
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0 and self.recurrence_violation is None

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "bound": self.bound,
            "sharp_bound": self.sharp_bound,
            "observed_gap": self.observed_gap,
            "analytic_gap": self.analytic_gap,
            "margin": self.margin,
            "steps": self.steps,
            "converged": self.converged,
            "recurrence_violation": self.recurrence_violation,
            "recurrence_max_excess": self.recurrence_max_excess,
            "perturbed_fixed_point": [float(v) for v in self.perturbed_fixed_point],
        }


def check_schedule_for_datadep(schedule: ControlSchedule, n_max: int) -> None:
    lowest = schedule.min_first(n_max)
    if lowest < MIN_FIRST_CONTROL:
        raise InadmissibleSchedule(
            f"data dependence needs alpha_n^1 >= 1/2 for every step; schedule reaches {lowest!r}"
        )
    if not schedule.first_series_diverges:
        raise InadmissibleSchedule("data dependence needs sum_n alpha_n^1 = infinity")


def data_dependence_experiment(
    problem: ContractionProblem,
    spec: PerturbationSpec,
    schedule: ControlSchedule,
    x0,
    max_n: int = 10_000,
    tolerance: float = PERTURBED_TOLERANCE,
) -> DataDependenceReport:
    """Run KO on T and on its approximation T~ from ``x0`` and compare the
    limit gap with 5 eps / (1 - delta).

    The perturbed limit is the last iterate of the perturbed run, stopped at
    ``tolerance``; the unperturbed run is carried for the same number of
    steps to check the per-step gap recurrence
    ||p_{n+1} - p~_{n+1}|| <= [1 - a1 (1 - delta)] ||p_n - p~_n|| + a1 * 5 eps.
    """
    if problem.known_fixed_point is None:
        raise ValueError("data dependence experiment needs the exact fixed point of T")
    check_schedule_for_datadep(schedule, max_n)
    approx = make_approximate_operator(problem, spec)
    delta, eps = problem.delta, spec.epsilon

    perturbed = run_scheme(approx, SchemeId.KO_PERTURBED, schedule, x0, max_n=max_n, tolerance=tolerance)
    plain = run_scheme(problem, SchemeId.KO, schedule, x0, max_n=perturbed.steps, tolerance=None)

    gaps = np.linalg.norm(plain.iterates - perturbed.iterates, axis=1)
    a1 = np.array([schedule(n)[0] for n in range(len(gaps))])
    rhs = (1.0 - a1 * (1.0 - delta)) * gaps + a1 * (1.0 - delta) * data_dependence_bound(eps, delta)
    excess = gaps[1:] - rhs[:-1]
    bad = np.flatnonzero(excess > OFFSET_SLACK)

    tilde_star = perturbed.final
    observed = norm(problem.known_fixed_point - tilde_star)
    bound = data_dependence_bound(eps, delta)
    analytic = None
    if spec.mode == "constant_shift" and approx.known_fixed_point is not None:
        analytic = norm(approx.known_fixed_point - problem.known_fixed_point)
    return DataDependenceReport(
        epsilon=eps,
        delta=delta,
        bound=bound,
        observed_gap=observed,
        margin=bound - observed,
        sharp_bound=eps / (1.0 - delta),
        perturbed_fixed_point=tilde_star,
        steps=perturbed.steps,
        converged=perturbed.termination == "reached_tolerance",
        recurrence_violation=int(bad[0]) if bad.size else None,
        recurrence_max_excess=float(excess.max()) if excess.size else -math.inf,
        gaps=gaps,
        analytic_gap=analytic,
        mode=spec.mode,
        seed=spec.seed,
    )


def data_dependence_batch(
    seeds: Sequence[int],
    epsilons: Sequence[float] = (0.01, 0.1),
    deltas: Sequence[float] = (0.3, 0.5, 0.9),
    max_n: int = 10_000,
) -> list[DataDependenceReport]:
    """Seeded smooth perturbations of scalar affine maps T(x) = a x + b.

    Each seed draws b, the start point and a schedule with alpha^1 in [1/2, 1].
    """
    reports = []
    for eps in epsilons:
        for a in deltas:
            for seed in seeds:
                rng = np.random.default_rng([int(seed), int(round(eps * 1e6)), int(round(a * 1e6))])
                b = float(rng.uniform(-5.0, 5.0))
                x0 = [float(rng.uniform(-10.0, 10.0))]
                sched = ControlSchedule.constant(
                    float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 1.0))
                )
                problem = scalar_affine(a, b)
                spec = PerturbationSpec(eps, "seeded_bounded", seed=int(seed))
                reports.append(data_dependence_experiment(problem, spec, sched, x0, max_n=max_n))
    return reports
