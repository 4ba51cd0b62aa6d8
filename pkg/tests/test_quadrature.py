import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from common.enum import BubbleKind, QuantityTag, Region, SignCondition
from common.exceptions import InvalidInput
from config import settings as app_settings
from oracles import radial_beta
from profiles import BubbleProfile
from quadrature import (
    budget_nodes,
    corner_ratio_identity_check,
    curvature_weighted_integral,
    halfball_volume,
    halfspace_boundary,
    halfspace_region_integral,
    halfspace_volume,
    improper_quad,
    radial_integral,
    radial_integral_closed_form,
    sign_condition,
    sign_condition_closed_form,
    sign_condition_functional,
    sphere_rule,
    sphere_rule_size,
    sphere_second_moments,
    trace_power_identity_check,
    unit_sphere_area,
)
from schemas import BoundaryModel, BubbleSpec, QuantityId, RadialIntegralSpec


def test_unit_sphere_area():
    assert unit_sphere_area(2) == pytest.approx(2 * math.pi)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)
    assert unit_sphere_area(4) == pytest.approx(2 * math.pi**2)
    with pytest.raises(InvalidInput):
        unit_sphere_area(0)


def test_improper_quad_exponential():
    assert improper_quad(lambda x: math.exp(-x)) == pytest.approx(1.0, rel=1e-10)


def test_improper_quad_power_tail():
    # 1 / (1 + x)^3 leaves a slowly decaying tail that only the estimate closes
    assert improper_quad(lambda x: (1 + x) ** -3) == pytest.approx(0.5, rel=1e-9)


@pytest.mark.parametrize(
    "a, b, c",
    [(4, 4, 1.0), (4, 3, 1.0), (6, 5, 1.0), (5, 5, 2.5), (7, 5, 8 / 3), (2, 3, 0.25), (0, 1, 1.0)],
)
def test_radial_integral_matches_gamma_oracle(a, b, c):
    spec = RadialIntegralSpec(num_power=a, den_power=b, shift=c)
    np.testing.assert_allclose(radial_integral(spec), radial_beta(a, b, c), rtol=1e-9)
    np.testing.assert_allclose(radial_integral_closed_form(spec), radial_beta(a, b, c), rtol=1e-12)


def test_radial_integral_known_value():
    # integral of r^4 / (1 + r^2)^4 is pi / 32
    spec = RadialIntegralSpec(num_power=4, den_power=4)
    assert radial_integral(spec) == pytest.approx(math.pi / 32, rel=1e-9)


def test_divergent_radial_integral_rejected():
    with pytest.raises(ValidationError):
        RadialIntegralSpec(num_power=4, den_power=2.5)


@given(st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=20, deadline=None)
def test_radial_integral_shift_scaling(shift):
    a, b = 5.0, 4.5
    scaled = radial_integral(RadialIntegralSpec(num_power=a, den_power=b, shift=shift))
    base = radial_integral(RadialIntegralSpec(num_power=a, den_power=b))
    assert scaled == pytest.approx(shift ** ((a + 1) / 2 - b) * base, rel=1e-8)


@pytest.mark.parametrize("dim", range(4, 11))
def test_trace_power_identity(dim):
    result = trace_power_identity_check(dim)
    assert result.rel_err <= 1e-9


@pytest.mark.parametrize("dim", range(4, 11))
def test_corner_ratio_identity(dim):
    result = corner_ratio_identity_check(dim)
    assert result.rel_err <= 1e-9
    shift = 2 * (dim - 1) / (dim - 2)
    ratio = radial_beta(dim + 2, dim, shift) / radial_beta(dim, dim, shift)
    assert ratio == pytest.approx(2 * (dim - 1) * (dim + 1) / ((dim - 2) * (dim - 3)), rel=1e-12)


@pytest.mark.parametrize("check", [trace_power_identity_check, corner_ratio_identity_check])
def test_identities_need_dimension_four(check):
    with pytest.raises(InvalidInput):
        check(3)


@pytest.mark.parametrize("ambient", [2, 3, 4, 6])
def test_sphere_rule_moments(ambient):
    directions, weights = sphere_rule(ambient, 6)
    area = unit_sphere_area(ambient)
    assert weights.sum() == pytest.approx(area)
    np.testing.assert_allclose(weights @ directions**2, np.full(ambient, area / ambient), rtol=1e-12)
    np.testing.assert_allclose(weights @ directions, np.zeros(ambient), atol=1e-12)


def test_curvature_reduction_matches_sphere_rule():
    curvatures = [0.2, 0.5, 0.9, 1.4]
    reduced = curvature_weighted_integral(curvatures, 5.0, 1.0, 2.0)
    moments = curvature_weighted_integral(curvatures, 5.0, 1.0, 2.0, reduction=False)
    assert reduced == pytest.approx(moments, rel=1e-10)


@pytest.mark.parametrize("ambient", range(2, 10))
def test_sphere_second_moments_are_exact(ambient):
    moments = sphere_second_moments(ambient)
    np.testing.assert_allclose(moments, np.full(ambient, unit_sphere_area(ambient) / ambient), rtol=1e-13)


@pytest.mark.parametrize("ambient", [3, 5, 9])
def test_product_rule_fits_direction_budget(ambient):
    nodes = budget_nodes(ambient)
    directions, weights = sphere_rule(ambient, nodes)
    assert nodes >= 2
    assert len(weights) == sphere_rule_size(ambient, nodes) <= app_settings.SPHERE_RULE_MAX_DIRECTIONS
    assert weights.sum() == pytest.approx(unit_sphere_area(ambient), rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0, rtol=1e-12)


@pytest.mark.parametrize("which", list(SignCondition))
@pytest.mark.parametrize("dim", [4, 5, 6, 7])
def test_sign_conditions_negative(which, dim, half_curvature_model):
    model = half_curvature_model(dim)
    value = sign_condition(which, dim, model)
    assert value < 0
    assert value == pytest.approx(sign_condition_closed_form(which, dim, model), rel=1e-8)


def test_sign_condition_uses_mean_curvature_only():
    skewed = BoundaryModel(dim=5, curvatures=[0.1, 0.3, 0.7, 0.9])
    uniform = BoundaryModel.uniform(5, 0.5)
    for which in SignCondition:
        assert sign_condition(which, 5, skewed) == pytest.approx(sign_condition(which, 5, uniform), rel=1e-10)


def test_sign_condition_functional_is_linear():
    curvatures = np.array([0.4, 0.8, 1.2])
    value = sign_condition_functional(SignCondition.CORNER_GAP, 4, curvatures)
    flipped = sign_condition_functional(SignCondition.CORNER_GAP, 4, -curvatures)
    assert flipped == pytest.approx(-value, rel=1e-12)
    assert value < 0


def test_sign_condition_requires_positive_mean_curvature():
    flat = BoundaryModel.uniform(4, 0.0)
    with pytest.raises(InvalidInput):
        sign_condition(SignCondition.TRACE_GAP, 4, flat)
    with pytest.raises(InvalidInput):
        sign_condition(SignCondition.TRACE_GAP, 3, BoundaryModel.uniform(3, 0.5))


@pytest.mark.parametrize("which", list(SignCondition))
@pytest.mark.parametrize("dim", [8, 9, 10])
def test_sign_conditions_in_high_dimensions(which, dim, half_curvature_model):
    model = half_curvature_model(dim)
    value = sign_condition(which, dim, model)
    assert value < 0
    assert value == pytest.approx(sign_condition_closed_form(which, dim, model), rel=1e-8)


@pytest.mark.parametrize("dim", [3, 4, 6])
def test_halfspace_volume_centred_pole(dim):
    value = halfspace_volume(lambda rho: (1 + rho**2) ** -dim, dim)
    expected = 0.5 * unit_sphere_area(dim) * radial_beta(dim - 1, dim)
    assert value == pytest.approx(expected, rel=1e-9)


def test_halfspace_volume_lifted_pole_loses_mass():
    # moving the pole below the plane leaves less of a positive integrand above it
    centred = halfspace_volume(lambda rho: (1 + rho**2) ** -4, 4)
    lifted = halfspace_volume(lambda rho: (1 + rho**2) ** -4, 4, offset=1.0)
    assert 0 < lifted < centred


@pytest.mark.parametrize("dim", [3, 5])
def test_halfspace_boundary_centred_pole(dim):
    value = halfspace_boundary(lambda rho: (1 + rho**2) ** -dim, dim)
    assert value == pytest.approx(unit_sphere_area(dim - 1) * radial_beta(dim - 2, dim), rel=1e-9)


@pytest.mark.parametrize("dim", [3, 4, 5])
def test_halfball_volume_of_constant(dim):
    value = halfball_volume(lambda rho: np.ones_like(rho), dim, offset=0.3, radius=2.0)
    assert value == pytest.approx(unit_sphere_area(dim) * 2.0**dim / (2 * dim), rel=1e-9)


def test_flat_boundary_region_equals_halfspace():
    flat = BoundaryModel.uniform(4, 0.0)
    quantity = QuantityId(tag=QuantityTag.GRAD_SQ, kind=BubbleKind.INTERIOR)
    profile = BubbleProfile(BubbleSpec(kind=BubbleKind.INTERIOR, dim=4, eps=0.01))
    expected = halfspace_volume(profile.grad_sq, 4, profile.offset, 0.01)
    assert halfspace_region_integral(quantity, flat, 0.01, 4) == pytest.approx(expected, rel=1e-12)


def test_curved_boundary_removes_volume(half_curvature_model):
    quantity = QuantityId(tag=QuantityTag.VOLUME_CRIT, kind=BubbleKind.INTERIOR)
    curved = halfspace_region_integral(quantity, half_curvature_model(5), 0.01, 5)
    flat = halfspace_region_integral(quantity, BoundaryModel.uniform(5, 0.0), 0.01, 5)
    assert curved < flat


def test_region_integral_rejects_large_eps(half_curvature_model):
    quantity = QuantityId(tag=QuantityTag.GRAD_SQ, kind=BubbleKind.CORNER)
    with pytest.raises(InvalidInput):
        halfspace_region_integral(quantity, half_curvature_model(4), 1.5, 4)


@pytest.mark.parametrize("tag, exponent", [(QuantityTag.GRAD_SQ, None), (QuantityTag.BOUNDARY_Q, 3.0)])
def test_general_patch_rule_matches_axisymmetric_path(tag, exponent):
    uniform = BoundaryModel.uniform(4, 0.5)
    nudged = BoundaryModel(dim=4, curvatures=[0.5, 0.5, 0.5 * (1 + 1e-12)])
    assert uniform.is_axisymmetric and not nudged.is_axisymmetric
    quantity = QuantityId(tag=tag, kind=BubbleKind.CORNER, exponent_q=exponent)
    axisymmetric = halfspace_region_integral(quantity, uniform, 0.01, 4, Region.SLAB)
    general = halfspace_region_integral(quantity, nudged, 0.01, 4, Region.SLAB)
    assert general == pytest.approx(axisymmetric, rel=1e-8)


def test_slab_matches_first_order_term(half_curvature_model):
    dim, eps = 4, 1e-2
    model = half_curvature_model(dim)
    quantity = QuantityId(tag=QuantityTag.GRAD_SQ, kind=BubbleKind.INTERIOR)
    slab = halfspace_region_integral(quantity, model, eps, dim, Region.SLAB)
    constant = dim ** ((dim - 2) / 2) * (dim - 2) ** ((dim + 2) / 2)
    leading = eps * constant * curvature_weighted_integral(model.curvatures, dim, extra_power=2.0)
    assert slab == pytest.approx(leading, rel=0.03)


def test_flat_slab_is_empty():
    quantity = QuantityId(tag=QuantityTag.VOLUME_CRIT, kind=BubbleKind.TRACE)
    assert halfspace_region_integral(quantity, BoundaryModel.uniform(5, 0.0), 0.01, 5, Region.SLAB) == 0.0
