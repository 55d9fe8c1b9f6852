"""Experiment config schema.

Configs are TOML documents; every table is validated strictly and unknown
keys are rejected. See ``configs/standard-ko-vs-cr.toml`` for a complete
example.
"""

from __future__ import annotations

import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..schemes import SchemeId

Analysis = Literal["bounds", "rates", "equivalence", "datadep", "lemmas", "oracle", "reductions", "theta"]


class ConfigError(ValueError):
    exit_code = 2


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemSpec(_Strict):
    kind: Literal["affine", "cosine"] = "affine"
    matrix: Optional[list[list[float]]] = None
    offset: Optional[list[float]] = None
    dimension: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _affine_needs_coefficients(self):
        if self.kind == "affine" and (self.matrix is None or self.offset is None):
            raise ValueError("affine problems need both 'matrix' and 'offset'")
        return self


class ScheduleSpec(_Strict):
    family: Literal["constant", "harmonic", "harmonic-complement"] = "constant"
    parameters: tuple[float, float, float] = (0.5, 0.5, 0.5)


class StopSpec(_Strict):
    max_n: int = Field(200, ge=0)
    # null / omitted in TOML is not expressible, so a negative value means "never stop early"
    tolerance: float = 1e-10


class DatadepSpec(_Strict):
    epsilon: float = Field(gt=0)
    mode: Literal["constant_shift", "seeded_bounded"] = "constant_shift"
    shift: Optional[list[float]] = None
    seed: Optional[int] = None
    max_n: int = Field(10_000, ge=1)
    batch_seeds: int = Field(0, ge=0)
    batch_epsilons: list[float] = [0.01, 0.1]
    batch_deltas: list[float] = [0.3, 0.5, 0.9]
    # constant-shift runs over the batch grid, checked against the closed-form gap
    batch_constant_shift: bool = False
    analytic_atol: float = 1e-12


class ThetaSpec(_Strict):
    expected_step_ratio: Optional[str] = None
    ratio_atol: float = 1e-12
    below: Optional[float] = None
    within: int = 200
    grid_deltas: list[float] = []
    grid_alpha1: list[float] = []
    grid_alpha23: list[tuple[float, float]] = []

    @field_validator("expected_step_ratio")
    @classmethod
    def _fraction(cls, v):
        if v is not None:
            Fraction(v)
        return v


class BoundsSpec(_Strict):
    tightness_source: Literal["exact", "float", "none"] = "exact"
    tightness_steps: int = 50
    tightness_rtol: float = 1e-12


class RatesSpec(_Strict):
    first: str = "CR"
    second: str = "KO"
    steps: int = Field(200, ge=8)
    source: Literal["auto", "exact", "float"] = "auto"
    lower: float = 0.01
    upper: float = 100.0
    expect_classification: Optional[Literal["first_faster", "same_rate", "second_faster", "inconclusive"]] = None
    expect_limit_at_most: Optional[float] = None


class EquivalenceSpec(_Strict):
    gap_below: float = 1e-10
    within: int = 200


class LemmaSpec(_Strict):
    tolerance: float = 1e-10
    divergence_threshold: float = 5.0


class OracleSpec(_Strict):
    abs_tol: float = 1e-12
    steps: Optional[int] = None


class ReductionSpec(_Strict):
    starts: list[list[float]] = [[0.0], [5.0], [-3.7]]
    schedules: list[tuple[float, float, float]] = [(0.5, 0.5, 0.5), (0.3, 0.7, 0.2)]
    steps: int = 50


class ExpectSpec(_Strict):
    termination: dict[str, int] = {}
    all_converged: bool = False


class OutputSpec(_Strict):
    directory: Optional[str] = None
    formats: list[Literal["csv", "json", "svg"]] = ["csv", "json", "svg"]


class ExperimentConfig(_Strict):
    name: str = Field(min_length=1)
    description: str = ""
    seed: int = 0
    schemes: list[str] = Field(min_length=1)
    problem: ProblemSpec
    schedule: ScheduleSpec = ScheduleSpec()
    x0: list[float]
    stop: StopSpec = StopSpec()
    analyses: list[Analysis] = []
    bounds: BoundsSpec = BoundsSpec()
    rates: RatesSpec = RatesSpec()
    equivalence: EquivalenceSpec = EquivalenceSpec()
    lemmas: LemmaSpec = LemmaSpec()
    oracle: OracleSpec = OracleSpec()
    datadep: Optional[DatadepSpec] = None
    theta: ThetaSpec = ThetaSpec()
    reductions: ReductionSpec = ReductionSpec()
    expect: ExpectSpec = ExpectSpec()
    output: OutputSpec = OutputSpec()

    @field_validator("schemes")
    @classmethod
    def _known_schemes(cls, v):
        return [SchemeId.parse(s).value for s in v]

    @model_validator(mode="after")
    def _cross_checks(self):
        needs_pert = SchemeId.KO_PERTURBED.value in self.schemes or "datadep" in self.analyses
        if needs_pert and self.datadep is None:
            raise ValueError("KOPerturbed runs and the datadep analysis need a [datadep] table")
        if "equivalence" in self.analyses and not {"KO", "CR"} <= set(self.schemes):
            raise ValueError("the equivalence analysis needs both KO and CR in 'schemes'")
        return self

    @property
    def tolerance(self) -> float | None:
        return None if self.stop.tolerance < 0 else self.stop.tolerance


BUILTIN_PACKAGE = "fprates.harness.configs"


def builtin_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(BUILTIN_PACKAGE).iterdir() if p.name.endswith(".toml"))


def resolve(path_or_name: str | Path) -> Path:
    """A filesystem path, or the name of a built-in config."""
    p = Path(path_or_name)
    if p.exists():
        return p
    candidate = resources.files(BUILTIN_PACKAGE) / f"{path_or_name}.toml"
    if candidate.is_file():
        return Path(str(candidate))
    raise ConfigError(f"no config file or built-in config named {str(path_or_name)!r}")


def load_config(path_or_name: str | Path, seed: int | None = None) -> ExperimentConfig:
    path = resolve(path_or_name)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if seed is not None:
        raw["seed"] = seed
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
