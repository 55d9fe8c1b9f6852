"""Fixed-point iteration schemes for contraction mappings, their error bounds,
rate comparison, data dependence, and an exact rational oracle."""

from .core import (
    AffineContraction,
    ContractionProblem,
    ControlSchedule,
    affine_fixed_point,
    apply_map,
    cosine_problem,
    make_affine_contraction,
    scalar_affine,
    schedule_eval,
    standard_problem,
)
from .schemes import IterationTrace, SchemeId, run_scheme, step

__version__ = "0.1.0"

__all__ = [
    "AffineContraction",
    "ContractionProblem",
    "ControlSchedule",
    "IterationTrace",
    "SchemeId",
    "affine_fixed_point",
    "apply_map",
    "cosine_problem",
    "make_affine_contraction",
    "run_scheme",
    "scalar_affine",
    "schedule_eval",
    "standard_problem",
    "step",
]
