"""One-step updates for every iteration scheme and the run loop producing traces.

All schemes blend a point with an image of T through :func:`blend`, evaluated
in a fixed order (innermost auxiliary point first), so traces are
reproducible bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ContractionProblem, ControlSchedule, as_point, norm

DEFAULT_TOLERANCE = 1e-10


class SchemeId(str, enum.Enum):
    PICARD = "Picard"
    MANN = "Mann"
    ISHIKAWA = "Ishikawa"
    NOOR = "Noor"
    SP = "SP"
    TWO_STEP_MANN = "TwoStepMann"
    S = "S"
    CR = "CR"
    KO = "KO"
    KO_PERTURBED = "KOPerturbed"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, tag) -> "SchemeId":
        if isinstance(tag, cls):
            return tag
        for member in cls:
            if member.value.lower() == str(tag).lower():
                return member
        raise ValueError(f"unknown scheme {tag!r}; expected one of {[m.value for m in cls]}")


class NonFiniteIterate(ArithmeticError):
    def __init__(self, scheme: SchemeId, step: int):
        super().__init__(f"{scheme}: non-finite iterate at step {step}; is the map really contractive?")
        self.scheme = scheme
        self.step = step


def blend(a: np.ndarray, b: np.ndarray, w: float) -> np.ndarray:
    """(1 - w) a + w b.

    Evaluated from the nearer endpoint so the result is exactly ``a`` at
    w = 0, exactly ``b`` at w = 1, and exactly ``a`` whenever a == b.
    """
    if w <= 0.5:
        return a + w * (b - a)
    return b + (1.0 - w) * (a - b)


def step_picard(problem: ContractionProblem, x: np.ndarray) -> np.ndarray:
    return problem.map(x)


def step_mann(problem: ContractionProblem, x: np.ndarray, alphas) -> np.ndarray:
    a1 = alphas[0]
    return blend(x, problem.map(x), a1)


def step_ishikawa(problem: ContractionProblem, x: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2 = alphas[0], alphas[1]
    y = blend(x, T(x), a2)
    return blend(x, T(y), a1)


def step_noor_family(problem: ContractionProblem, x: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2, a3 = alphas
    z = blend(x, T(x), a3)
    y = blend(x, T(z), a2)
    return blend(x, T(y), a1)


def step_two_step_mann(problem: ContractionProblem, x: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2 = alphas[0], alphas[1]
    y = blend(x, T(x), a2)
    return blend(y, T(y), a1)


def step_sp_family(problem: ContractionProblem, x: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2, a3 = alphas
    z = blend(x, T(x), a3)
    y = blend(z, T(z), a2)
    return blend(y, T(y), a1)


def step_s(problem: ContractionProblem, s: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2 = alphas[0], alphas[1]
    ts = T(s)
    t = blend(s, ts, a2)
    return blend(ts, T(t), a1)


def step_cr(problem: ContractionProblem, u: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2, a3 = alphas
    tu = T(u)
    y = blend(u, tu, a3)
    v = blend(tu, T(y), a2)
    return blend(v, T(v), a1)


def step_ko(problem: ContractionProblem, p: np.ndarray, alphas) -> np.ndarray:
    T = problem.map
    a1, a2, a3 = alphas
    tp = T(p)
    r = blend(p, tp, a3)
    q = blend(tp, T(r), a2)
    return blend(tp, T(q), a1)


def step_ko_perturbed(approx_problem: ContractionProblem, p: np.ndarray, alphas) -> np.ndarray:
    """KO step with every evaluation of T replaced by the approximate operator."""
    if approx_problem.perturbation is None:
        raise ValueError("step_ko_perturbed needs an approximate operator (see make_approximate_operator)")
    return step_ko(approx_problem, p, alphas)


StepFn = Callable[[ContractionProblem, np.ndarray, tuple], np.ndarray]

_STEPS: dict[SchemeId, StepFn] = {
    SchemeId.PICARD: lambda problem, x, alphas: step_picard(problem, x),
    SchemeId.MANN: step_mann,
    SchemeId.ISHIKAWA: step_ishikawa,
    SchemeId.NOOR: step_noor_family,
    SchemeId.SP: step_sp_family,
    SchemeId.TWO_STEP_MANN: step_two_step_mann,
    SchemeId.S: step_s,
    SchemeId.CR: step_cr,
    SchemeId.KO: step_ko,
    SchemeId.KO_PERTURBED: step_ko_perturbed,
}

# number of schedule components each scheme reads
ARITY: dict[SchemeId, int] = {
    SchemeId.PICARD: 0,
    SchemeId.MANN: 1,
    SchemeId.ISHIKAWA: 2,
    SchemeId.TWO_STEP_MANN: 2,
    SchemeId.S: 2,
    SchemeId.NOOR: 3,
    SchemeId.SP: 3,
    SchemeId.CR: 3,
    SchemeId.KO: 3,
    SchemeId.KO_PERTURBED: 3,
}


def step(scheme: SchemeId, problem: ContractionProblem, x, alphas=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Single validated step of ``scheme`` from ``x``."""
    scheme = SchemeId.parse(scheme)
    alphas = tuple(float(a) for a in alphas) + (0.0,) * (3 - len(alphas))
    if not all(0.0 <= a <= 1.0 for a in alphas):
        raise ValueError(f"control values must lie in [0, 1], got {alphas}")
    return _STEPS[scheme](problem, as_point(x, problem.dimension), alphas)


@dataclass(frozen=True)
class IterationTrace:
    scheme: SchemeId
    iterates: np.ndarray  # shape (N+1, d)
    residuals: np.ndarray
    schedule_used: ControlSchedule
    termination: str  # "reached_max_n" | "reached_tolerance"
    errors: np.ndarray | None = None
    fixed_point: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.iterates)

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1]


def run_scheme(
    problem: ContractionProblem,
    scheme: SchemeId | str,
    schedule: ControlSchedule,
    x0,
    max_n: int = 200,
    tolerance: float | None = DEFAULT_TOLERANCE,
) -> IterationTrace:
    """Iterate ``scheme`` from ``x0``.

    Stops at the first n whose error (when the fixed point is known) or
    residual ||x_n - T x_n|| is at most ``tolerance``, or at ``max_n``.
    ``tolerance=None`` always runs ``max_n`` steps.
    """
    scheme = SchemeId.parse(scheme)
    if scheme is SchemeId.KO_PERTURBED and problem.perturbation is None:
        raise ValueError("KOPerturbed runs on an approximate operator")
    if max_n < 0:
        raise ValueError("max_n must be nonnegative")
    step_fn = _STEPS[scheme]
    T = problem.map
    x_star = problem.known_fixed_point
    x = as_point(x0, problem.dimension)

    iterates, residuals, errors = [], [], []
    termination = "reached_max_n"
    for n in range(max_n + 1):
        if not np.all(np.isfinite(x)):
            raise NonFiniteIterate(scheme, n)
        iterates.append(x)
        res = norm(x - T(x))
        residuals.append(res)
        if x_star is not None:
            err = norm(x - x_star)
            errors.append(err)
            gauge = err
        else:
            gauge = res
        if tolerance is not None and gauge <= tolerance:
            termination = "reached_tolerance"
            break
        if n == max_n:
            break
        x = step_fn(problem, x, schedule(n))

    return IterationTrace(
        scheme=scheme,
        iterates=np.vstack(iterates),
        residuals=np.array(residuals),
        schedule_used=schedule,
        termination=termination,
        errors=np.array(errors) if x_star is not None else None,
        fixed_point=x_star,
    )
