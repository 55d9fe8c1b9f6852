"""Contraction mappings, control schedules and the built-in test problems.

Points are 1-D float64 numpy arrays; the norm is always Euclidean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

FIXED_POINT_RTOL = 1e-12
CONTRACTION_SLACK = 1e-12

MapFn = Callable[[np.ndarray], np.ndarray]
ScheduleFamily = Literal["constant", "harmonic", "harmonic-complement"]


class DimensionError(ValueError):
    pass


class NotContractiveError(ValueError):
    pass


def norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def as_point(x, dimension: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a finite float64 vector, optionally of a fixed dimension."""
    p = np.array(x, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise DimensionError("a point needs at least one coordinate")
    if dimension is not None and p.size != dimension:
        raise DimensionError(f"expected dimension {dimension}, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"non-finite coordinates in {p!r}")
    return p


@dataclass(frozen=True)
class AffineContraction:
    """The map x -> A x + b."""

    matrix: np.ndarray
    offset: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x + self.offset


@dataclass(frozen=True, eq=False)
class ContractionProblem:
    map: MapFn
    lipschitz_constant: float
    dimension: int
    known_fixed_point: np.ndarray | None = None
    name: str = ""
    affine: AffineContraction | None = None
    # set on approximate operators built by fprates.datadep
    perturbation: object | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.lipschitz_constant < 1.0:
            raise NotContractiveError(
                f"Lipschitz constant must lie in (0, 1), got {self.lipschitz_constant!r}"
            )
        if self.dimension < 1:
            raise DimensionError("dimension must be positive")
        if self.known_fixed_point is not None:
            xs = as_point(self.known_fixed_point, self.dimension)
            object.__setattr__(self, "known_fixed_point", xs)
            gap = norm(self.map(xs) - xs)
            if gap > FIXED_POINT_RTOL * max(1.0, norm(xs)):
                raise ValueError(f"declared fixed point is off by {gap:.3e}")

    @property
    def delta(self) -> float:
        return self.lipschitz_constant

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.map(x)


def apply_map(problem: ContractionProblem, x) -> np.ndarray:
    """Evaluate T(x) after validating the point."""
    return problem.map(as_point(x, problem.dimension))


def operator_norm(matrix: np.ndarray) -> float:
    """Spectral norm (largest singular value) of a square matrix."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.shape == (1, 1):
        return abs(float(a[0, 0]))
    return float(np.linalg.norm(a, 2))


def _as_square(matrix, dimension: int | None = None) -> np.ndarray:
    a = np.array(matrix, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1 and a.size == 1:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix must be square, got shape {a.shape}")
    if dimension is not None and a.shape[0] != dimension:
        raise DimensionError(f"matrix is {a.shape[0]}x{a.shape[0]}, offset has dimension {dimension}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def affine_fixed_point(matrix, offset) -> np.ndarray:
    """Solve x = A x + b directly; requires ||A|| < 1."""
    b = as_point(offset)
    a = _as_square(matrix, b.size)
    delta = operator_norm(a)
    if delta >= 1.0:
        raise NotContractiveError(f"operator norm {delta!r} is not below 1")
    if b.size == 1:
        return np.array([b[0] / (1.0 - a[0, 0])])
    return np.linalg.solve(np.eye(b.size) - a, b)


def make_affine_contraction(matrix, offset, name: str = "") -> ContractionProblem:
    b = as_point(offset)
    a = _as_square(matrix, b.size)
    a.setflags(write=False)
    b.setflags(write=False)
    delta = operator_norm(a)
    if delta >= 1.0:
        raise NotContractiveError(f"operator norm {delta!r} is not below 1")
    if delta == 0.0:
        # constant map; any delta in (0, 1) is a valid Lipschitz constant
        delta = np.nextafter(0.0, 1.0)
    affine = AffineContraction(a, b)
    return ContractionProblem(
        map=affine,
        lipschitz_constant=delta,
        dimension=b.size,
        known_fixed_point=affine_fixed_point(a, b),
        name=name or f"affine-d{b.size}",
        affine=affine,
    )


def standard_problem() -> ContractionProblem:
    """T(x) = 0.5 x + 1 on the real line; fixed point 2."""
    return make_affine_contraction([[0.5]], [1.0], name="standard")


def scalar_affine(a: float, b: float, name: str = "") -> ContractionProblem:
    return make_affine_contraction([[a]], [b], name=name or f"scalar(a={a!r},b={b!r})")


def _half_cosine(x: np.ndarray) -> np.ndarray:
    return 0.5 * np.cos(x)


def cosine_problem(dimension: int = 1, tol: float = 1e-15, max_iter: int = 10_000) -> ContractionProblem:
    """T(x) = cos(x)/2 coordinate-wise, delta = 1/2.

    The fixed point is pre-solved by Picard iteration; every coordinate shares
    the scalar solution of x = cos(x)/2.
    """
    x = 0.0
    for _ in range(max_iter):
        nxt = 0.5 * math.cos(x)
        if abs(nxt - x) <= tol:
            x = nxt
            break
        x = nxt
    else:
        raise RuntimeError("Picard pre-solve for cos(x)/2 did not converge")
    return ContractionProblem(
        map=_half_cosine,
        lipschitz_constant=0.5,
        dimension=dimension,
        known_fixed_point=np.full(dimension, x),
        name=f"half-cosine-d{dimension}",
    )


def contraction_violation(
    problem: ContractionProblem,
    n_pairs: int = 1000,
    seed: int = 0,
    scale: float = 10.0,
) -> float:
    """Largest ||Tx - Ty|| - delta ||x - y|| over seeded random pairs.

    A value above the slack 1e-12 means the declared constant is wrong.
    """
    rng = np.random.default_rng(seed)
    center = problem.known_fixed_point if problem.known_fixed_point is not None else 0.0
    worst = -math.inf
    for _ in range(n_pairs):
        x = center + scale * rng.standard_normal(problem.dimension)
        y = center + scale * rng.standard_normal(problem.dimension)
        lhs = norm(problem.map(x) - problem.map(y))
        worst = max(worst, lhs - problem.delta * norm(x - y))
    return worst


def check_contraction(problem: ContractionProblem, n_pairs: int = 1000, seed: int = 0) -> None:
    excess = contraction_violation(problem, n_pairs=n_pairs, seed=seed)
    if excess > CONTRACTION_SLACK:
        raise NotContractiveError(
            f"{problem.name or 'map'}: contraction condition fails by {excess:.3e} on sampled pairs"
        )


def _harmonic_number(n: int) -> float:
    """H_n = sum_{k=1}^{n} 1/k, correctly rounded sum of the terms."""
    return math.fsum(1.0 / k for k in range(1, n + 1))


@dataclass(frozen=True)
class ControlSchedule:
    """Closed-form control sequences alpha_n^1, alpha_n^2, alpha_n^3.

    ``constant`` uses ``parameters`` as the three values; ``harmonic`` is
    1/(n+1) and ``harmonic-complement`` is 1 - 1/(n+2), applied to every
    component.
    """

    family: ScheduleFamily = "constant"
    parameters: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.family not in ("constant", "harmonic", "harmonic-complement"):
            raise ValueError(f"unknown schedule family {self.family!r}")
        params = tuple(float(p) for p in self.parameters)
        if len(params) != 3:
            raise ValueError("a schedule has exactly three components")
        if not all(0.0 <= p <= 1.0 for p in params):
            raise ValueError(f"schedule parameters must lie in [0, 1], got {params}")
        object.__setattr__(self, "parameters", params)

    @classmethod
    def constant(cls, a1: float, a2: float = 0.0, a3: float = 0.0) -> "ControlSchedule":
        return cls("constant", (a1, a2, a3))

    @property
    def is_constant(self) -> bool:
        return self.family == "constant"

    def __call__(self, n: int) -> tuple[float, float, float]:
        return schedule_eval(self, n)

    def lower_bounds(self) -> tuple[float, float, float]:
        """Infimum of each component over n >= 0."""
        if self.family == "constant":
            return self.parameters
        if self.family == "harmonic":
            return (0.0, 0.0, 0.0)
        return (0.5, 0.5, 0.5)

    def bounded_below(self) -> tuple[bool, bool, bool]:
        return tuple(v > 0.0 for v in self.lower_bounds())

    @property
    def first_series_diverges(self) -> bool:
        """Whether sum_n alpha_n^1 is infinite (decided from the family)."""
        if self.family == "constant":
            return self.parameters[0] > 0.0
        return True

    def partial_sum(self, n: int) -> float:
        """sum_{k=0}^{n} alpha_k^1."""
        if n < 0:
            return 0.0
        if self.family == "constant":
            return (n + 1) * self.parameters[0]
        if self.family == "harmonic":
            return _harmonic_number(n + 1)
        # sum_{k=0}^{n} (1 - 1/(k+2)) = (n+1) - (H_{n+2} - 1)
        return (n + 1) - (_harmonic_number(n + 2) - 1.0)

    def min_first(self, n_max: int) -> float:
        """Smallest alpha_n^1 for 0 <= n <= n_max."""
        if self.family == "constant":
            return self.parameters[0]
        if self.family == "harmonic":
            return 1.0 / (n_max + 1)
        return 0.5


def schedule_eval(s: ControlSchedule, n: int) -> tuple[float, float, float]:
    if n < 0:
        raise ValueError("schedule index must be nonnegative")
    if s.family == "constant":
        return s.parameters
    if s.family == "harmonic":
        v = 1.0 / (n + 1)
    else:
        v = 1.0 - 1.0 / (n + 2)
    return (v, v, v)
