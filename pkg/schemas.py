import math
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, computed_field, field_validator, model_validator

from common.enum import (
    BubbleKind,
    CommandName,
    ExitStatus,
    LemmaId,
    ModelForm,
    QuantityTag,
    Regime,
    ReportFormat,
    Verdict,
)
from config import settings

# Exponents within this distance of a critical value count as critical
CRITICAL_ATOL = 1e-12


def critical_exponent(dim: int) -> float:
    """Sobolev exponent 2N/(N-2)."""
    return 2.0 * dim / (dim - 2)


def trace_exponent(dim: int) -> float:
    """Trace exponent 2(N-1)/(N-2)."""
    return 2.0 * (dim - 1) / (dim - 2)


# Bubble Schemas
class BubbleSpec(BaseModel):
    kind: BubbleKind
    dim: int = Field(..., ge=3)
    eps: float = Field(..., gt=0)

    @property
    def corner_offset(self) -> float:
        return math.sqrt(self.dim / (self.dim - 2))

    @property
    def pole_offset(self) -> float:
        """Distance of the profile centre below the plane x_N = 0."""
        if self.kind == BubbleKind.TRACE:
            return self.eps
        if self.kind == BubbleKind.CORNER:
            return self.eps * self.corner_offset
        return 0.0


class EnergyBreakdown(BaseModel):
    dirichlet: float = Field(..., ge=0)
    mass: Optional[float] = Field(None, ge=0)
    volume_nl: float = Field(..., ge=0)
    boundary_nl: float = Field(..., ge=0)
    r_exp: float = Field(..., gt=2)
    q_exp: float = Field(..., gt=2)

    @computed_field
    @property
    def total(self) -> float:
        mass = self.mass if self.mass is not None else 0.0
        return (
            self.dirichlet / 2
            + mass / 2
            - self.volume_nl / self.r_exp
            - self.boundary_nl / self.q_exp
        )


class SobolevConstants(BaseModel):
    dim: int
    S: float = Field(..., gt=0)
    S_T: float = Field(..., gt=0)


class ResidualReport(BaseModel):
    interior_max: float = 0.0
    boundary_max: float = 0.0
    interior_count: int = 0
    boundary_count: int = 0


# Quadrature Schemas
class RadialIntegralSpec(BaseModel):
    num_power: float = Field(..., ge=0)
    den_power: float = Field(..., gt=0)
    shift: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def check_convergence(self):
        if 2 * self.den_power - self.num_power <= 1:
            raise ValueError(
                f"integral diverges: 2b - a = {2 * self.den_power - self.num_power:g} <= 1"
            )
        return self


class IdentityCheck(BaseModel):
    name: str
    dim: int
    lhs: float
    rhs: float
    rel_err: float


class BoundaryModel(BaseModel):
    dim: int = Field(..., ge=3)
    curvatures: List[float]
    curvature_bounds: Optional[Tuple[float, float]] = None
    patch_radius: float = Field(default_factory=lambda: settings.PATCH_RADIUS, gt=0)
    perturbation_exponent: float = Field(2.5, gt=2)
    kappa: float = Field(0.0, ge=0)
    domain_radius: Optional[float] = Field(None, gt=0)

    @field_validator("curvatures")
    @classmethod
    def check_curvatures(cls, value):
        if not value:
            raise ValueError("at least one curvature is required")
        if any(alpha < 0 or not math.isfinite(alpha) for alpha in value):
            raise ValueError("curvatures must be finite and nonnegative")
        return value

    @model_validator(mode="after")
    def check_geometry(self):
        if len(self.curvatures) == 1:
            self.curvatures = self.curvatures * (self.dim - 1)
        if len(self.curvatures) != self.dim - 1:
            raise ValueError(
                f"expected {self.dim - 1} curvatures, got {len(self.curvatures)}"
            )
        delta = self.patch_radius
        bump = self.kappa * delta ** self.perturbation_exponent
        if self.curvature_bounds is not None:
            low, high = self.curvature_bounds
            if not 0 < low <= high:
                raise ValueError("curvature bounds need 0 < a <= A")
            if min(self.curvatures) < low or max(self.curvatures) + bump / delta**2 > high:
                raise ValueError("boundary graph leaves the band a|x'|^2 <= h <= A|x'|^2")
        height = max(self.curvatures) * delta**2 + bump
        if delta**2 + height**2 >= self.truncation_radius**2:
            raise ValueError("patch does not fit inside the truncated model domain")
        return self

    @property
    def truncation_radius(self) -> float:
        return self.domain_radius if self.domain_radius is not None else settings.DOMAIN_RADIUS

    @property
    def mean_curvature(self) -> float:
        return 2.0 * sum(self.curvatures) / (self.dim - 1)

    @property
    def is_axisymmetric(self) -> bool:
        return max(self.curvatures) - min(self.curvatures) <= 1e-15 * max(1.0, max(self.curvatures))

    @classmethod
    def uniform(cls, dim: int, alpha: float, **kwargs) -> "BoundaryModel":
        return cls(dim=dim, curvatures=[alpha] * (dim - 1), **kwargs)

    def scaled(self, factor: float) -> "BoundaryModel":
        return self.model_copy(update={"curvatures": [factor * a for a in self.curvatures]})


# Asymptotics Schemas
class QuantityId(BaseModel):
    tag: QuantityTag
    kind: BubbleKind
    exponent_q: Optional[float] = Field(None, gt=2)

    @model_validator(mode="after")
    def check_exponent(self):
        needs_exponent = self.tag in (QuantityTag.BOUNDARY_Q, QuantityTag.VOLUME_POWER)
        if needs_exponent != (self.exponent_q is not None):
            raise ValueError(f"exponent_q must be given exactly for boundary/power tags, got {self.tag.value}")
        return self

    @property
    def on_boundary(self) -> bool:
        return self.tag == QuantityTag.BOUNDARY_Q

    @property
    def truncated(self) -> bool:
        """Mass and subcritical volume powers live on the truncated model domain."""
        return self.tag in (QuantityTag.MASS_SQ, QuantityTag.VOLUME_POWER)


class SweepSample(BaseModel):
    eps: float = Field(..., gt=0)
    value: float


class ExpansionFit(BaseModel):
    c0: float
    c1: float
    c2: float = 0.0
    log_coeff: float = 0.0
    remainder_coeffs: List[float] = []
    power_scale: Optional[float] = None
    fit_residual: float = Field(..., ge=0)
    eps_window: Tuple[float, float]
    model_form: ModelForm
    condition: float = 1.0


class LemmaItemReport(BaseModel):
    lemma: LemmaId
    item: str
    dim: int
    quantity: QuantityTag
    kind: BubbleKind
    model_form: ModelForm
    coeff_fitted: float
    coeff_closed_form: Optional[float] = None
    rel_dev: Optional[float] = None
    c0_fitted: Optional[float] = None
    c0_reference: Optional[float] = None
    window_spread: Optional[float] = None
    verdict: Verdict
    detail: str = ""
    samples: List[SweepSample] = []


class LemmaReport(BaseModel):
    lemma: LemmaId
    dim: int
    mean_curvature: float
    items: List[LemmaItemReport]

    @property
    def verdict(self) -> Verdict:
        if all(item.verdict == Verdict.PASS for item in self.items):
            return Verdict.PASS
        return Verdict.FAIL

    def item(self, label: str) -> LemmaItemReport:
        for entry in self.items:
            if entry.item == label:
                return entry
        raise KeyError(label)


class ThresholdGap(BaseModel):
    regime: Regime
    dim: int
    eps: float
    r_exp: float
    q_exp: float
    t_eps: float
    sup_level: float
    threshold: float
    gap: float


# Solver Schemas
class SolverConfig(BaseModel):
    dim: int = Field(..., ge=3)
    radius: float = Field(1.0, gt=0)
    r_exp: float = Field(..., gt=2)
    q_exp: float = Field(..., gt=2)
    mesh_size: int = Field(default_factory=lambda: settings.MESH_SIZE, ge=8)
    tol_grad: float = Field(default_factory=lambda: settings.TOL_GRAD, gt=0)

    @model_validator(mode="after")
    def check_exponents(self):
        if self.r_exp > critical_exponent(self.dim) + CRITICAL_ATOL:
            raise ValueError(f"r = {self.r_exp:g} exceeds 2N/(N-2) = {critical_exponent(self.dim):g}")
        if self.q_exp > trace_exponent(self.dim) + CRITICAL_ATOL:
            raise ValueError(f"q = {self.q_exp:g} exceeds 2(N-1)/(N-2) = {trace_exponent(self.dim):g}")
        return self

    @property
    def regime(self) -> Regime:
        volume = abs(self.r_exp - critical_exponent(self.dim)) <= CRITICAL_ATOL
        trace = abs(self.q_exp - trace_exponent(self.dim)) <= CRITICAL_ATOL
        if volume and trace:
            return Regime.DOUBLE_CRITICAL
        if volume:
            return Regime.VOLUME_CRITICAL
        if trace:
            return Regime.TRACE_CRITICAL
        return Regime.SUBCRITICAL


class RadialMesh(BaseModel):
    nodes: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @field_validator("nodes")
    @classmethod
    def check_nodes(cls, value):
        value = np.asarray(value, dtype=float)
        if value.ndim != 1 or value.size < 3:
            raise ValueError("mesh needs at least three nodes")
        if value[0] != 0.0 or np.any(np.diff(value) <= 0):
            raise ValueError("mesh must start at 0 and increase strictly")
        return value

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])


class DiscreteField(BaseModel):
    mesh: RadialMesh
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_values(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.mesh.nodes.shape:
            raise ValueError("field does not match its mesh")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field has non-finite values")
        return self


class MountainPassResult(BaseModel):
    field: DiscreteField
    level: float
    grad_norm: float
    nehari_residual: float
    h1_norm: float
    iterations: int
    node_count: int = 0
    converged: bool = True


class SolutionResiduals(BaseModel):
    ode_residual_max: float
    bc0_residual: float
    bcR_residual: float
    trivial: bool = False


class ThresholdReport(BaseModel):
    regime: Regime
    dim: int
    S: float
    S_T: float
    c_inf: float
    threshold: float
    level: float
    margin: float
    threshold_note: Optional[str] = None
    ground_below_volume_threshold: bool


# Campaign Schemas
class CampaignConfig(BaseModel):
    command: CommandName
    dims: List[int] = Field(..., min_length=1)
    exponent_grid: List[Tuple[float, float]] = []
    volume_exponents: List[Union[float, Literal["crit"]]] = []
    trace_exponents: List[Union[float, Literal["crit"]]] = []
    curvatures: List[float] = [0.5]
    curvature_bounds: Optional[Tuple[float, float]] = None
    kappa: float = Field(0.0, ge=0)
    patch_radius: float = Field(default_factory=lambda: settings.PATCH_RADIUS, gt=0)
    eps_min: float = Field(default_factory=lambda: settings.EPS_MIN, gt=0)
    eps_max: float = Field(default_factory=lambda: settings.EPS_MAX, gt=0)
    eps_points: int = Field(default_factory=lambda: settings.EPS_POINTS, ge=4)
    threshold_eps: Optional[float] = Field(None, gt=0)
    radius: float = Field(1.0, gt=0)
    mesh_size: int = Field(default_factory=lambda: settings.MESH_SIZE, ge=8)
    tol_grad: float = Field(default_factory=lambda: settings.TOL_GRAD, gt=0)
    node_count: int = Field(0, ge=0)
    lemmas: List[LemmaId] = []
    out_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    report_format: ReportFormat = ReportFormat.CSV
    tolerance_overrides: Dict[str, float] = {}

    @field_validator("dims")
    @classmethod
    def check_dims(cls, value):
        if any(dim < 3 for dim in value):
            raise ValueError("every dimension must be at least 3")
        return value

    @field_validator("tolerance_overrides")
    @classmethod
    def check_overrides(cls, value):
        for key, tol in value.items():
            if key not in type(settings).model_fields:
                raise ValueError(f"unknown tolerance {key}")
            if not tol > 0:
                raise ValueError(f"tolerance {key} must be positive")
        return value

    @model_validator(mode="after")
    def check_window(self):
        if self.eps_min >= self.eps_max:
            raise ValueError("eps_min must be below eps_max")
        return self

    def boundary_model(self, dim: int) -> BoundaryModel:
        return BoundaryModel(
            dim=dim,
            curvatures=list(self.curvatures),
            curvature_bounds=self.curvature_bounds,
            patch_radius=self.patch_radius,
            kappa=self.kappa,
        )

    def eps_list(self) -> List[float]:
        return list(np.geomspace(self.eps_max, self.eps_min, self.eps_points))

    def exponent_pairs(self, dim: int) -> List[Tuple[float, float]]:
        """(r, q) grid for one dimension; "crit" resolves to the critical value."""
        if self.exponent_grid:
            return list(self.exponent_grid)

        def resolve(values, critical):
            if not values:
                return [1 + critical / 2]
            return [critical if value == "crit" else float(value) for value in values]

        volume = resolve(self.volume_exponents, critical_exponent(dim))
        trace = resolve(self.trace_exponents, trace_exponent(dim))
        return [(r, q) for r in volume for q in trace]


class CheckResult(BaseModel):
    name: str
    dim: Optional[int] = None
    value: Optional[float] = None
    reference: Optional[float] = None
    verdict: Verdict
    detail: str = ""


class CommandOutcome(BaseModel):
    """Tables keyed by file stem plus the checks a command asserted."""

    tables: Dict[str, List[Any]] = {}
    checks: List[CheckResult] = []


class VerdictRecord(BaseModel):
    command: CommandName
    status: ExitStatus
    checks: List[CheckResult]
    files: List[str] = []

    @property
    def failed(self) -> List[CheckResult]:
        return [check for check in self.checks if check.verdict == Verdict.FAIL]


# Report rows
class LemmaAuditRow(BaseModel):
    lemma: LemmaId
    item: str
    dim: int
    coeff_fitted: float
    coeff_closed_form: Optional[float] = None
    rel_dev: Optional[float] = None
    verdict: Verdict


class SweepRow(BaseModel):
    lemma: LemmaId
    item: str
    dim: int
    eps: float
    value: float


class SolveRow(BaseModel):
    dim: int
    r: float
    q: float
    regime: Regime
    level: float
    threshold: float
    margin: float
    grad_norm: float


class ConstantsRow(BaseModel):
    dim: int
    S: float
    S_T: float
    c_inf: float
    volume_threshold: float
    verdict: Verdict


class BubbleRow(BaseModel):
    kind: BubbleKind
    dim: int
    eps: float
    interior_max: float
    boundary_max: float
    dirichlet: float
    volume_nl: float
    boundary_nl: float
    total: float


class IdentityRow(BaseModel):
    name: str
    dim: int
    lhs: float
    rhs: float
    rel_err: float
    verdict: Verdict


class ThresholdRow(BaseModel):
    regime: Regime
    dim: int
    eps: float
    r: float
    q: float
    t_eps: float
    sup_level: float
    threshold: float
    gap: float
    verdict: Verdict


class ProfileRow(BaseModel):
    rho: float
    u: float
