"""Radial and axisymmetric integration kernels.

All bubble integrands depend on the distance to a pole on the x_N axis, so every
integral over the half-space, its boundary plane, a truncated half-ball or the
thin slab under a boundary graph collapses to one adaptive Gauss-Kronrod
integral, with Gauss-Legendre rules for the short inner directions.
"""
import logging
import math
import warnings
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special

from common.enum import Region, SignCondition
from common.exceptions import InvalidInput, QuadratureError
from config import settings
from profiles import BubbleProfile
from schemas import BoundaryModel, BubbleSpec, IdentityCheck, QuantityId, RadialIntegralSpec

logger = logging.getLogger(__name__)

RadialFunction = Callable[[np.ndarray], np.ndarray]


def unit_sphere_area(ambient_dim: int) -> float:
    """Area of the unit sphere in R^d."""
    if ambient_dim < 1:
        raise InvalidInput(f"ambient dimension must be >= 1, got {ambient_dim}")
    return 2.0 * math.pi ** (ambient_dim / 2) / special.gamma(ambient_dim / 2)


def _quad(func, lower: float, upper: float, points: Optional[List[float]] = None) -> float:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        value, abserr = integrate.quad(
            func,
            lower,
            upper,
            points=points or None,
            epsabs=0.0,
            epsrel=settings.QUAD_RTOL,
            limit=settings.QUAD_LIMIT,
        )
    if not math.isfinite(value):
        raise QuadratureError(f"non-finite integral on [{lower:.6g}, {upper:.6g}]")
    if caught and abserr > 100 * settings.QUAD_RTOL * abs(value):
        raise QuadratureError(
            f"no convergence on [{lower:.6g}, {upper:.6g}]: {value:.6g} +- {abserr:.3g}"
        )
    return value


def _power_tail(func, point: float) -> Optional[float]:
    """Tail integral beyond `point` assuming local power-law decay."""
    near, far = float(func(point)), float(func(2 * point))
    if near == 0.0 and far == 0.0:
        return 0.0
    if near * far <= 0.0:
        return None
    decay = math.log2(near / far)
    if decay <= 1.0 + 1e-6:
        return None
    return near * point / (decay - 1.0)


def improper_quad(func, lower: float = 0.0, scale: float = 1.0) -> float:
    """Integral of `func` over [lower, inf) by decade splitting plus a tail estimate."""
    right = lower + scale
    total = _quad(func, lower, right)
    for decade in range(1, settings.MAX_DECADES + 1):
        left, right = right, lower + scale * 10.0**decade
        total += _quad(func, left, right)
        tail = _power_tail(func, right)
        if tail is not None and abs(tail) <= settings.TAIL_RTOL * abs(total):
            logger.debug("improper_quad stopped at %.3g after %d decades", right, decade)
            return total + tail
    raise QuadratureError(
        f"tail did not fall below {settings.TAIL_RTOL:g} of the partial sum "
        f"within {settings.MAX_DECADES} decades"
    )


def _breakpoints(scale: float, upper: float) -> List[float]:
    points = []
    mark = scale
    while mark < upper:
        points.append(mark)
        mark *= math.sqrt(10.0)
    return points


# One-dimensional integrals
def radial_integral(spec: RadialIntegralSpec) -> float:
    """Integral of r^a / (c + r^2)^b over (0, inf)."""
    a, b, c = spec.num_power, spec.den_power, spec.shift

    def integrand(r):
        if r == 0.0:
            return c ** (-b) if a == 0 else 0.0
        return math.exp(a * math.log(r) - b * math.log(c + r * r))

    return improper_quad(integrand, 0.0, math.sqrt(c))


def radial_integral_closed_form(spec: RadialIntegralSpec) -> float:
    a, b, c = spec.num_power, spec.den_power, spec.shift
    half = (a + 1) / 2
    return 0.5 * c ** (half - b) * special.beta(half, b - half)


def trace_power_identity_check(dim: int) -> IdentityCheck:
    """Compare the integrals of r^N/(1+r^2)^(N-1) and 2(N-1)/(N-3) r^N/(1+r^2)^N."""
    if dim <= 3:
        raise InvalidInput(f"identity needs N >= 4, got {dim}")
    lhs = radial_integral(RadialIntegralSpec(num_power=dim, den_power=dim - 1))
    base = radial_integral(RadialIntegralSpec(num_power=dim, den_power=dim))
    rhs = 2 * (dim - 1) / (dim - 3) * base
    return IdentityCheck(name="trace_power_identity", dim=dim, lhs=lhs, rhs=rhs, rel_err=abs(lhs - rhs) / abs(rhs))


def corner_ratio_identity_check(dim: int) -> IdentityCheck:
    if dim <= 3:
        raise InvalidInput(f"identity needs N >= 4, got {dim}")
    shift = 2 * (dim - 1) / (dim - 2)
    lhs = radial_integral(RadialIntegralSpec(num_power=dim + 2, den_power=dim, shift=shift))
    base = radial_integral(RadialIntegralSpec(num_power=dim, den_power=dim, shift=shift))
    ratio = 2 * (dim - 1) * (dim + 1) / ((dim - 2) * (dim - 3))
    rhs = ratio * base
    return IdentityCheck(name="corner_ratio_identity", dim=dim, lhs=lhs, rhs=rhs, rel_err=abs(lhs - rhs) / abs(rhs))


# Sphere rules and curvature moments
def _polar_rule(ambient_dim: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Gegenbauer nodes in t = cos(phi) for the weight (1 - t^2)^((n-3)/2) on S^(n-1)."""
    return special.roots_gegenbauer(nodes, (ambient_dim - 2) / 2)


@lru_cache(maxsize=None)
def sphere_rule(ambient_dim: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Product rule on the unit sphere of R^n: directions (m, n) and weights.

    Each polar level is exact for polynomials of degree 2 * nodes - 1 in cos(phi).
    """
    if ambient_dim < 2:
        raise InvalidInput("sphere rule needs ambient dimension >= 2")
    if ambient_dim == 2:
        phi = 2 * math.pi * (np.arange(2 * nodes) + 0.5) / (2 * nodes)
        return np.column_stack([np.cos(phi), np.sin(phi)]), np.full(2 * nodes, math.pi / nodes)
    lower_dirs, lower_weights = sphere_rule(ambient_dim - 1, nodes)
    t, w = _polar_rule(ambient_dim, nodes)
    ring = np.sqrt(1.0 - t**2)
    directions = np.concatenate([np.column_stack([np.full(len(lower_dirs), c), s * lower_dirs]) for c, s in zip(t, ring)])
    weights = np.outer(w, lower_weights).ravel()
    return directions, weights


def sphere_rule_size(ambient_dim: int, nodes: int) -> int:
    return 2 * nodes ** (ambient_dim - 1)


def budget_nodes(ambient_dim: int) -> int:
    """Largest per-level node count whose product rule fits SPHERE_RULE_MAX_DIRECTIONS."""
    nodes = settings.SPHERE_RULE_NODES
    while nodes > 2 and sphere_rule_size(ambient_dim, nodes) > settings.SPHERE_RULE_MAX_DIRECTIONS:
        nodes -= 1
    return nodes


@lru_cache(maxsize=None)
def sphere_second_moments(ambient_dim: int) -> np.ndarray:
    """Integrals of x_i^2 over the unit sphere of R^n, one per axis.

    Taking axis i as the pole reduces each moment to a one-dimensional
    Gauss-Gegenbauer sum in cos(phi) times the area of the equator sphere.
    """
    if ambient_dim < 2:
        raise InvalidInput("sphere moments need ambient dimension >= 2")
    if ambient_dim == 2:
        return np.full(2, math.pi)
    t, w = _polar_rule(ambient_dim, 2)
    moment = unit_sphere_area(ambient_dim - 1) * float(w @ t**2)
    return np.full(ambient_dim, moment)


def curvature_weighted_integral(
    curvatures,
    den_power: float,
    shift: float = 1.0,
    extra_power: float = 0.0,
    reduction: bool = True,
) -> float:
    """Integral over R^(N-1) of g(x') |x'|^extra / (shift + |x'|^2)^den, g = sum alpha_i x_i^2.

    With `reduction` the mean-curvature identity collapses the sphere average
    to H/2 times the sphere area; otherwise every alpha_i is weighted by its own
    second moment of the sphere, which keeps the value linear in each of them.
    """
    alphas = np.asarray(curvatures, dtype=float)
    ambient = alphas.size
    radial = radial_integral(
        RadialIntegralSpec(num_power=ambient + 1 + extra_power, den_power=den_power, shift=shift)
    )
    if reduction:
        mean_curvature = 2.0 * alphas.sum() / ambient
        return 0.5 * mean_curvature * unit_sphere_area(ambient) * radial
    return float(alphas @ sphere_second_moments(ambient)) * radial


def _corner_constants(dim: int):
    offset_sq = dim / (dim - 2)
    interior = dim ** ((dim - 2) / 2) * (dim - 2) ** ((dim + 2) / 2)
    volume = dim ** (dim / 2) * (dim - 2) ** (dim / 2)
    return offset_sq, 1 + offset_sq, interior, volume


def sign_condition_functional(which: SignCondition, dim: int, curvatures) -> float:
    """Left-hand side of a sign condition, linear in the curvatures."""
    if dim <= 3:
        raise InvalidInput(f"sign conditions need N >= 4, got {dim}")
    if len(curvatures) != dim - 1:
        raise InvalidInput(f"expected {dim - 1} curvatures, got {len(curvatures)}")

    def weighted(den_power, shift=1.0, extra_power=0.0):
        return curvature_weighted_integral(curvatures, den_power, shift, extra_power, reduction=False)

    if which == SignCondition.TRACE_GAP:
        factor = (dim - 2) ** dim
        return factor * weighted(dim) - 0.5 * factor * weighted(dim - 1)

    offset_sq, shift, interior, volume = _corner_constants(dim)
    coupled = weighted(dim, shift, extra_power=2.0) + offset_sq * weighted(dim, shift)
    plain = weighted(dim, shift)
    return -0.5 * interior * coupled + 0.5 * interior * plain + volume * plain


def _checked_mean_curvature(dim: int, model: BoundaryModel) -> float:
    if dim <= 3:
        raise InvalidInput(f"sign conditions need N >= 4, got {dim}")
    if model.dim != dim:
        raise InvalidInput(f"boundary model has dimension {model.dim}, expected {dim}")
    if model.mean_curvature <= 0:
        raise InvalidInput("mean curvature must be positive")
    return model.mean_curvature


def sign_condition(which: SignCondition, dim: int, model: BoundaryModel) -> float:
    _checked_mean_curvature(dim, model)
    value = sign_condition_functional(which, dim, model.curvatures)
    logger.info("sign condition %s at N=%d: %.12g", which.value, dim, value)
    return value


def sign_condition_closed_form(which: SignCondition, dim: int, model: BoundaryModel) -> float:
    """Reduced form of the sign condition via the mean curvature and Beta integrals."""
    mean_curvature = _checked_mean_curvature(dim, model)
    omega = unit_sphere_area(dim - 1)
    if which == SignCondition.TRACE_GAP:
        base = radial_integral_closed_form(RadialIntegralSpec(num_power=dim, den_power=dim))
        return -((dim - 2) ** dim) * mean_curvature * omega * base / (dim - 3)
    _, shift, _, _ = _corner_constants(dim)
    base = radial_integral_closed_form(RadialIntegralSpec(num_power=dim, den_power=dim, shift=shift))
    return (
        -2 * dim ** ((dim - 2) / 2) * (dim - 2) ** (dim / 2)
        * (dim - 1) / (dim - 3) * mean_curvature * omega * base
    )


# Half-space, half-ball, slab and graph kernels
def halfspace_volume(radial: RadialFunction, dim: int, offset: float = 0.0, scale: float = 1.0) -> float:
    """Integral of F(|x - p|) over x_N > 0 with the pole p = (0, -offset)."""
    half = (dim - 1) / 2
    cap = unit_sphere_area(dim - 1) * 0.5 * special.beta(half, 0.5)

    def integrand(sigma):
        if sigma == 0.0:
            return 0.0
        rho = math.hypot(sigma, offset)
        fraction = 1.0 if offset == 0.0 else special.betainc(half, 0.5, (sigma / rho) ** 2)
        return float(radial(rho)) * rho ** (dim - 2) * sigma * cap * fraction

    return improper_quad(integrand, 0.0, scale)


def halfspace_boundary(
    radial: RadialFunction,
    dim: int,
    offset: float = 0.0,
    scale: float = 1.0,
    radius: Optional[float] = None,
) -> float:
    """Integral of F over the plane x_N = 0, optionally cut at |x'| = radius."""
    omega = unit_sphere_area(dim - 1)

    def integrand(s):
        return omega * s ** (dim - 2) * float(radial(math.hypot(s, offset)))

    if radius is None:
        return improper_quad(integrand, 0.0, scale)
    return _quad(integrand, 0.0, radius, points=_breakpoints(scale, radius))


def halfball_volume(radial: RadialFunction, dim: int, offset: float, radius: float, scale: float = 1.0) -> float:
    """Integral of F over {|x| < radius, x_N > 0}."""
    x, w = leggauss(settings.ANGLE_GL_NODES)
    theta = math.pi * (x + 1) / 4
    angular = w * (math.pi / 4) * np.sin(theta) ** (dim - 2) * unit_sphere_area(dim - 1)
    cosines = np.cos(theta)

    def shell(r):
        distance = np.sqrt(r * r + offset * offset + 2 * r * offset * cosines)
        return r ** (dim - 1) * float(angular @ radial(distance))

    return _quad(shell, 0.0, radius, points=_breakpoints(scale, radius))


def _patch_directions(model: BoundaryModel):
    ambient = model.dim - 1
    alphas = np.asarray(model.curvatures, dtype=float)
    if model.is_axisymmetric:
        directions = np.zeros((1, ambient))
        directions[0, 0] = 1.0
        weights = np.array([unit_sphere_area(ambient)])
    else:
        directions, weights = sphere_rule(ambient, budget_nodes(ambient))
    return directions, weights, directions**2 @ alphas, directions * alphas


def _graph_height(model: BoundaryModel, s: float, quad_form: np.ndarray) -> np.ndarray:
    return s * s * quad_form + model.kappa * s**model.perturbation_exponent


def slab_volume(radial: RadialFunction, model: BoundaryModel, offset: float, scale: float = 1.0) -> float:
    """Integral of F over the layer {|x'| < delta, 0 < x_N < h(x')}."""
    if max(model.curvatures) == 0.0 and model.kappa == 0.0:
        return 0.0
    dim = model.dim
    _, weights, quad_form, _ = _patch_directions(model)
    x, w = leggauss(settings.SLAB_GL_NODES)

    def ring(s):
        height = _graph_height(model, s, quad_form)
        heights = height[:, None] * (x + 1) / 2
        values = radial(np.sqrt(s * s + (heights + offset) ** 2))
        column = 0.5 * height * (values @ w)
        return s ** (dim - 2) * float(weights @ column)

    return _quad(ring, 0.0, model.patch_radius, points=_breakpoints(scale, model.patch_radius))


def graph_boundary_correction(radial: RadialFunction, model: BoundaryModel, offset: float, scale: float = 1.0) -> float:
    """Graph surface integral of F over the patch minus the flat-disc integral."""
    if max(model.curvatures) == 0.0 and model.kappa == 0.0:
        return 0.0
    dim = model.dim
    p = model.perturbation_exponent
    directions, weights, quad_form, slopes = _patch_directions(model)

    def ring(s):
        height = _graph_height(model, s, quad_form)
        gradient = 2 * s * slopes + model.kappa * p * s ** (p - 1) * directions
        jacobian = np.sqrt(1.0 + np.sum(gradient**2, axis=1))
        lifted = radial(np.sqrt(s * s + (height + offset) ** 2)) * jacobian
        flat = radial(math.hypot(s, offset))
        return s ** (dim - 2) * float(weights @ (lifted - flat))

    return _quad(ring, 0.0, model.patch_radius, points=_breakpoints(scale, model.patch_radius))


def halfspace_region_integral(
    integrand: QuantityId,
    model: BoundaryModel,
    eps: float,
    dim: int,
    region: Region = Region.DOMAIN,
) -> float:
    """Integral of a tagged bubble quantity over a piece of the model domain.

    SLAB gives the layer between the plane and the graph (for boundary tags: the
    graph-minus-disc correction); DOMAIN the region above the graph; TRUNCATED
    its intersection with the ball of radius `model.truncation_radius`.
    """
    if model.dim != dim:
        raise InvalidInput(f"boundary model has dimension {model.dim}, expected {dim}")
    if not 0 < eps < model.patch_radius:
        raise InvalidInput(f"eps = {eps:g} must lie in (0, patch radius {model.patch_radius:g})")
    profile = BubbleProfile(BubbleSpec(kind=integrand.kind, dim=dim, eps=eps))
    radial = profile.integrand(integrand)
    offset = profile.offset

    if integrand.on_boundary:
        correction = graph_boundary_correction(radial, model, offset, eps)
        if region == Region.SLAB:
            return correction
        upper = model.truncation_radius if region == Region.TRUNCATED else None
        return halfspace_boundary(radial, dim, offset, eps, upper) + correction

    slab = slab_volume(radial, model, offset, eps)
    if region == Region.SLAB:
        return slab
    if region == Region.TRUNCATED:
        return halfball_volume(radial, dim, offset, model.truncation_radius, eps) - slab
    return halfspace_volume(radial, dim, offset, eps) - slab
