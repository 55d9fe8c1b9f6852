"""Exact rational evaluation of every scheme on affine maps.

Floats handed to this module are converted with ``Fraction(x)``, i.e. their
exact binary value, so a comparison against a float trace measures only the
rounding accumulated by the float run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import ContractionProblem, ControlSchedule
from .schemes import IterationTrace, SchemeId

Vec = tuple  # tuple[Fraction, ...]


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    return Fraction(float(value))


def _vec(values) -> Vec:
    return tuple(to_fraction(v) for v in np.asarray(values, dtype=object).reshape(-1))


@dataclass(frozen=True)
class RationalAffine:
    matrix: tuple  # tuple of row tuples
    offset: Vec

    @classmethod
    def from_values(cls, matrix, offset) -> "RationalAffine":
        b = _vec(offset)
        rows = np.asarray(matrix, dtype=object).reshape(len(b), len(b))
        return cls(tuple(_vec(r) for r in rows), b)

    @classmethod
    def from_problem(cls, problem: ContractionProblem) -> "RationalAffine":
        if problem.affine is None:
            raise ValueError(f"{problem.name or 'problem'} is not affine; the exact oracle needs A and b")
        return cls.from_values(problem.affine.matrix, problem.affine.offset)

    @property
    def dimension(self) -> int:
        return len(self.offset)

    def __call__(self, x: Vec) -> Vec:
        return tuple(sum((a * xi for a, xi in zip(row, x)), Fraction(0)) + bi
                     for row, bi in zip(self.matrix, self.offset))

    def fixed_point(self) -> Vec:
        """Solve (I - A) x = b by exact Gaussian elimination."""
        d = self.dimension
        m = [[(Fraction(int(i == j)) - self.matrix[i][j]) for j in range(d)] + [self.offset[i]]
             for i in range(d)]
        for col in range(d):
            pivot = next(r for r in range(col, d) if m[r][col] != 0)
            m[col], m[pivot] = m[pivot], m[col]
            for r in range(d):
                if r != col and m[r][col] != 0:
                    f = m[r][col] / m[col][col]
                    m[r] = [a - f * b for a, b in zip(m[r], m[col])]
        return tuple(m[i][d] / m[i][i] for i in range(d))


def _comb(x: Vec, y: Vec, w: Fraction) -> Vec:
    return tuple((1 - w) * a + w * b for a, b in zip(x, y))


def _exact_step(T: RationalAffine, scheme: SchemeId, x: Vec, a1, a2, a3) -> Vec:
    if scheme is SchemeId.PICARD:
        return T(x)
    if scheme is SchemeId.MANN:
        return _comb(x, T(x), a1)
    if scheme is SchemeId.ISHIKAWA:
        y = _comb(x, T(x), a2)
        return _comb(x, T(y), a1)
    if scheme is SchemeId.NOOR:
        z = _comb(x, T(x), a3)
        y = _comb(x, T(z), a2)
        return _comb(x, T(y), a1)
    if scheme is SchemeId.TWO_STEP_MANN:
        y = _comb(x, T(x), a2)
        return _comb(y, T(y), a1)
    if scheme is SchemeId.SP:
        z = _comb(x, T(x), a3)
        y = _comb(z, T(z), a2)
        return _comb(y, T(y), a1)
    if scheme is SchemeId.S:
        t = _comb(x, T(x), a2)
        return _comb(T(x), T(t), a1)
    if scheme is SchemeId.CR:
        y = _comb(x, T(x), a3)
        v = _comb(T(x), T(y), a2)
        return _comb(v, T(v), a1)
    if scheme in (SchemeId.KO, SchemeId.KO_PERTURBED):
        r = _comb(x, T(x), a3)
        q = _comb(T(x), T(r), a2)
        return _comb(T(x), T(q), a1)
    raise ValueError(f"no exact rule for {scheme}")


@dataclass(frozen=True)
class ExactTrace:
    scheme: SchemeId
    iterates: list  # list of Vec
    alphas: tuple  # (a1, a2, a3) as Fractions
    fixed_point: Vec

    def __len__(self) -> int:
        return len(self.iterates)

    def squared_errors(self) -> list:
        return [sum(((a - b) ** 2 for a, b in zip(x, self.fixed_point)), Fraction(0))
                for x in self.iterates]

    def errors(self) -> np.ndarray:
        """Euclidean errors as floats, accurate to a few ulps even far below 1e-300."""
        out = []
        for x in self.iterates:
            if len(x) == 1:
                out.append(float(abs(x[0] - self.fixed_point[0])))
            else:
                sq = sum(((a - b) ** 2 for a, b in zip(x, self.fixed_point)), Fraction(0))
                out.append(_sqrt_fraction(sq))
        return np.array(out)

    def as_floats(self) -> np.ndarray:
        return np.array([[float(c) for c in x] for x in self.iterates])


def _sqrt_fraction(q: Fraction) -> float:
    if q == 0:
        return 0.0
    return math.exp(0.5 * (math.log(q.numerator) - math.log(q.denominator)))


def exact_run(
    affine: RationalAffine | ContractionProblem,
    scheme: SchemeId | str,
    schedule: ControlSchedule | Sequence,
    x0,
    n_steps: int,
) -> ExactTrace:
    """``n_steps`` exact iterations (n_steps + 1 iterates) with constant controls."""
    scheme = SchemeId.parse(scheme)
    if isinstance(affine, ContractionProblem):
        affine = RationalAffine.from_problem(affine)
    if isinstance(schedule, ControlSchedule):
        if not schedule.is_constant:
            raise ValueError(f"exact oracle supports constant schedules only, got {schedule.family!r}")
        schedule = schedule.parameters
    alphas = tuple(to_fraction(a) for a in schedule) + (Fraction(0),) * (3 - len(schedule))
    x = _vec(x0)
    if len(x) != affine.dimension:
        raise ValueError(f"start has dimension {len(x)}, map has {affine.dimension}")
    iterates = [x]
    for _ in range(n_steps):
        x = _exact_step(affine, scheme, x, *alphas)
        iterates.append(x)
    return ExactTrace(scheme, iterates, alphas, affine.fixed_point())


@dataclass(frozen=True)
class TraceComparison:
    max_abs_gap: float
    passed: bool
    worst_index: int


def compare_traces(float_trace: IterationTrace, exact: ExactTrace, abs_tol: float = 1e-12) -> TraceComparison:
    """Max |float - round(exact)| over all steps and coordinates."""
    if len(float_trace) != len(exact):
        raise ValueError(f"trace lengths differ: float {len(float_trace)} vs exact {len(exact)}")
    if float_trace.scheme is not exact.scheme:
        raise ValueError(f"scheme mismatch: {float_trace.scheme} vs {exact.scheme}")
    gaps = np.abs(np.asarray(float_trace.iterates) - exact.as_floats()).max(axis=1)
    worst = int(np.argmax(gaps))
    max_gap = float(gaps[worst])
    return TraceComparison(max_gap, max_gap <= abs_tol, worst)
