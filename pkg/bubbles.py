import logging
import math
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special
from scipy.stats import qmc

from common.enum import BubbleKind
from common.exceptions import InvalidInput
from profiles import BubbleProfile
from quadrature import halfspace_boundary, halfspace_volume, unit_sphere_area
from schemas import (
    BubbleSpec,
    EnergyBreakdown,
    ResidualReport,
    SobolevConstants,
    critical_exponent,
    trace_exponent,
)

logger = logging.getLogger(__name__)


def _checked_point(spec: BubbleSpec, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != spec.dim:
        raise InvalidInput(f"point must have {spec.dim} coordinates")
    if not np.all(np.isfinite(point)):
        raise InvalidInput("point must be finite")
    if np.any(point[..., -1] < 0):
        raise InvalidInput("points must satisfy x_N >= 0")
    return point


def eval_bubble(spec: BubbleSpec, point) -> float:
    """Closed-form value at a point of the closed upper half-space."""
    point = _checked_point(spec, point)
    profile = BubbleProfile(spec)
    return float(profile.value(profile.radius(point)))


def bubble_gradient(spec: BubbleSpec, point) -> np.ndarray:
    point = _checked_point(spec, point)
    profile = BubbleProfile(spec)
    return profile.slope_over_rho(profile.radius(point)) * (point - profile.pole)


def sample_points(spec: BubbleSpec, count: int, location: str = "interior", seed: int = 0) -> np.ndarray:
    """Quasi-random points in a box of side 3 eps above (or on) the boundary plane.

    `location` is "interior", "boundary" or "mixed" (half of each).
    """
    if count < 1:
        raise InvalidInput("count must be positive")
    if location == "mixed":
        first = count // 2
        return np.vstack([
            sample_points(spec, count - first, "interior", seed),
            sample_points(spec, first, "boundary", seed + 1),
        ])
    sampler = qmc.Halton(d=spec.dim, scramble=True, seed=seed)
    unit = sampler.random(count)
    points = 3 * spec.eps * (2 * unit - 1)
    if location == "boundary":
        points[:, -1] = 0.0
    elif location == "interior":
        points[:, -1] = 3 * spec.eps * (unit[:, -1] + 1e-3)
    else:
        raise InvalidInput(f"unknown location {location!r}")
    return points


def pde_residual(spec: BubbleSpec, sample_points) -> ResidualReport:
    """Largest relative residuals of the limit problem at the given points.

    Points with x_N > 0 test the volume equation, points with x_N = 0 the
    boundary condition; each residual is divided by the largest term entering it.
    """
    if len(sample_points) == 0:
        raise InvalidInput("empty sample set")
    points = np.atleast_2d(_checked_point(spec, sample_points))
    profile = BubbleProfile(spec)
    dim = spec.dim
    rho = profile.radius(points)
    value = profile.value(rho)

    report = ResidualReport()
    interior = points[:, -1] > 0
    if np.any(interior):
        second = profile.second(rho[interior])
        radial_part = (dim - 1) * profile.slope_over_rho(rho[interior])
        laplacian = second + radial_part
        if spec.kind == BubbleKind.TRACE:
            source = np.zeros_like(laplacian)
        else:
            source = value[interior] ** (critical_exponent(dim) - 1)
        scale = np.maximum.reduce([np.ones_like(source), np.abs(source), np.abs(second), np.abs(radial_part)])
        report.interior_max = float(np.max(np.abs(-laplacian - source) / scale))
        report.interior_count = int(np.sum(interior))

    boundary = ~interior
    if np.any(boundary):
        normal_derivative = -profile.slope_over_rho(rho[boundary]) * profile.offset
        if spec.kind == BubbleKind.INTERIOR:
            flux = np.zeros_like(normal_derivative)
        else:
            flux = value[boundary] ** (trace_exponent(dim) - 1)
        scale = np.maximum.reduce([np.ones_like(flux), np.abs(flux), np.abs(normal_derivative)])
        report.boundary_max = float(np.max(np.abs(normal_derivative - flux) / scale))
        report.boundary_count = int(np.sum(boundary))
    return report


def bubble_energy_halfspace(spec: BubbleSpec) -> EnergyBreakdown:
    """Energies of the bubble over the upper half-space and its boundary plane.

    The mass term diverges on the half-space in low dimensions and is reported
    as not applicable; `total` is then the limit functional without mass.
    """
    profile = BubbleProfile(spec)
    dim, eps, offset = spec.dim, spec.eps, profile.offset
    r_exp, q_exp = critical_exponent(dim), trace_exponent(dim)
    dirichlet = halfspace_volume(profile.grad_sq, dim, offset, eps)
    volume_nl = halfspace_volume(lambda rho: profile.power(rho, r_exp), dim, offset, eps)
    boundary_nl = halfspace_boundary(lambda rho: profile.power(rho, q_exp), dim, offset, eps)
    logger.debug("half-space energy %s N=%d eps=%g: D=%.12g", spec.kind.value, dim, eps, dirichlet)
    return EnergyBreakdown(
        dirichlet=dirichlet,
        mass=None,
        volume_nl=volume_nl,
        boundary_nl=boundary_nl,
        r_exp=r_exp,
        q_exp=q_exp,
    )


def _check_dim(dim: int):
    if dim < 3:
        raise InvalidInput(f"dimension must be >= 3, got {dim}")


@lru_cache(maxsize=None)
def sobolev_constants(dim: int, eps: float = 1.0) -> SobolevConstants:
    _check_dim(dim)
    interior = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.INTERIOR, dim=dim, eps=eps))
    # The interior bubble is even in x_N, so whole-space integrals are twice the half-space ones
    whole_dirichlet = 2 * interior.dirichlet
    whole_volume = 2 * interior.volume_nl
    S = whole_dirichlet / whole_volume ** (2 / critical_exponent(dim))

    trace = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.TRACE, dim=dim, eps=eps))
    S_T = trace.dirichlet / trace.boundary_nl ** (2 / trace_exponent(dim))
    return SobolevConstants(dim=dim, S=S, S_T=S_T)


@lru_cache(maxsize=None)
def ground_state_level(dim: int, eps: float = 1.0) -> float:
    """Limit energy of the corner bubble, the double-critical threshold."""
    _check_dim(dim)
    return bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.CORNER, dim=dim, eps=eps)).total


def volume_threshold(dim: int, constants: Optional[SobolevConstants] = None) -> float:
    constants = constants or sobolev_constants(dim)
    return constants.S ** (dim / 2) / (2 * dim)


def trace_threshold(dim: int, constants: Optional[SobolevConstants] = None) -> float:
    constants = constants or sobolev_constants(dim)
    return constants.S_T ** (dim - 1) / (2 * (dim - 1))


def sobolev_constants_closed_form(dim: int) -> SobolevConstants:
    """Gamma-function values of both constants, independent of any quadrature."""
    _check_dim(dim)
    S = math.pi * dim * (dim - 2) * (special.gamma(dim / 2) / special.gamma(dim)) ** (2 / dim)
    S_T = (dim - 2) / 2 * unit_sphere_area(dim) ** (1 / (dim - 1))
    return SobolevConstants(dim=dim, S=S, S_T=S_T)
