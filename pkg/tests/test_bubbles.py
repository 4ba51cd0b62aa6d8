import math

import numpy as np
import pytest

from bubbles import (
    bubble_energy_halfspace,
    bubble_gradient,
    eval_bubble,
    ground_state_level,
    pde_residual,
    sample_points,
    sobolev_constants,
    sobolev_constants_closed_form,
    trace_threshold,
    volume_threshold,
)
from common.enum import BubbleKind
from common.exceptions import InvalidInput
from oracles import sobolev_constant, trace_constant
from schemas import BubbleSpec


@pytest.mark.parametrize("kind", list(BubbleKind))
@pytest.mark.parametrize("dim", [3, 4, 5, 6])
@pytest.mark.parametrize("eps", [0.25, 1.0, 4.0])
def test_bubbles_solve_limit_problem(kind, dim, eps):
    spec = BubbleSpec(kind=kind, dim=dim, eps=eps)
    report = pde_residual(spec, sample_points(spec, 200, "mixed"))
    assert report.interior_count + report.boundary_count == 200
    assert report.interior_max < 1e-9
    assert report.boundary_max < 1e-9


def test_interior_bubble_peak():
    spec = BubbleSpec(kind=BubbleKind.INTERIOR, dim=4, eps=1.0)
    assert eval_bubble(spec, [0, 0, 0, 0]) == pytest.approx(2 * math.sqrt(2))
    # peak scales like eps^(-(N-2)/2)
    small = BubbleSpec(kind=BubbleKind.INTERIOR, dim=4, eps=0.25)
    assert eval_bubble(small, [0, 0, 0, 0]) == pytest.approx(4 * 2 * math.sqrt(2))


def test_corner_bubble_pole_below_plane():
    spec = BubbleSpec(kind=BubbleKind.CORNER, dim=5, eps=0.1)
    assert spec.pole_offset == pytest.approx(0.1 * math.sqrt(5 / 3))
    on_axis = eval_bubble(spec, [0, 0, 0, 0, 0])
    above = eval_bubble(spec, [0, 0, 0, 0, 0.05])
    assert on_axis > above > 0


def test_trace_and_corner_values_at_origin():
    origin = [0.0, 0.0, 0.0]
    assert eval_bubble(BubbleSpec(kind=BubbleKind.TRACE, dim=3, eps=1.0), origin) == pytest.approx(1.0, rel=1e-15)
    corner = eval_bubble(BubbleSpec(kind=BubbleKind.CORNER, dim=3, eps=1.0), origin)
    assert corner == pytest.approx(3**0.25 / 2, rel=1e-14)


@pytest.mark.parametrize("dim", [3, 4, 6])
def test_interior_gradient_vanishes_at_centre(dim):
    spec = BubbleSpec(kind=BubbleKind.INTERIOR, dim=dim, eps=0.7)
    np.testing.assert_array_equal(bubble_gradient(spec, np.zeros(dim)), np.zeros(dim))


def test_trace_gradient_on_axis():
    spec = BubbleSpec(kind=BubbleKind.TRACE, dim=3, eps=1.0)
    np.testing.assert_allclose(bubble_gradient(spec, [0.0, 0.0, 1.0]), [0.0, 0.0, -0.25], atol=1e-15)


@pytest.mark.parametrize("kind", list(BubbleKind))
def test_gradient_matches_central_differences(kind):
    spec = BubbleSpec(kind=kind, dim=4, eps=0.7)
    point = np.array([0.3, -0.2, 0.1, 0.4])
    step = 1e-6
    numeric = np.array([
        (eval_bubble(spec, point + step * e) - eval_bubble(spec, point - step * e)) / (2 * step)
        for e in np.eye(4)
    ])
    np.testing.assert_allclose(bubble_gradient(spec, point), numeric, rtol=1e-7)


def test_points_below_plane_rejected():
    spec = BubbleSpec(kind=BubbleKind.TRACE, dim=3, eps=1.0)
    with pytest.raises(InvalidInput):
        eval_bubble(spec, [0.0, 0.0, -0.1])
    with pytest.raises(InvalidInput):
        eval_bubble(spec, [0.0, 0.1])


def test_empty_sample_set_rejected():
    spec = BubbleSpec(kind=BubbleKind.CORNER, dim=4, eps=1.0)
    with pytest.raises(InvalidInput):
        pde_residual(spec, np.empty((0, 4)))


def test_sample_points_are_reproducible():
    spec = BubbleSpec(kind=BubbleKind.INTERIOR, dim=3, eps=0.5)
    first = sample_points(spec, 64, "boundary", seed=3)
    np.testing.assert_array_equal(first, sample_points(spec, 64, "boundary", seed=3))
    assert np.all(first[:, -1] == 0)
    interior = sample_points(spec, 64, "interior")
    assert np.all(interior[:, -1] > 0)
    with pytest.raises(InvalidInput):
        sample_points(spec, 10, "outside")


@pytest.mark.parametrize("dim", [3, 4, 5, 6, 7])
def test_constants_match_gamma_oracle(dim):
    constants = sobolev_constants(dim)
    assert constants.S == pytest.approx(sobolev_constant(dim), rel=1e-8)
    assert constants.S_T == pytest.approx(trace_constant(dim), rel=1e-8)
    closed = sobolev_constants_closed_form(dim)
    assert closed.S == pytest.approx(sobolev_constant(dim), rel=1e-12)


def test_known_constant_values():
    assert sobolev_constants(4).S == pytest.approx(8 * math.pi / math.sqrt(6), rel=1e-8)
    assert sobolev_constants(3).S_T == pytest.approx(math.sqrt(math.pi), rel=1e-8)


@pytest.mark.parametrize("dim", [3, 4, 5, 6])
def test_halfspace_dirichlet_identities(dim):
    constants = sobolev_constants(dim)
    interior = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.INTERIOR, dim=dim, eps=1.0))
    trace = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.TRACE, dim=dim, eps=1.0))
    assert interior.dirichlet == pytest.approx(constants.S ** (dim / 2) / 2, rel=1e-6)
    assert trace.dirichlet == pytest.approx(constants.S_T ** (dim - 1), rel=1e-6)
    assert interior.mass is None


def test_trace_energies_do_not_depend_on_scale():
    energies = [bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.TRACE, dim=3, eps=eps)) for eps in (0.5, 1.0, 2.0)]
    for name in ("dirichlet", "boundary_nl"):
        values = np.array([getattr(energy, name) for energy in energies])
        assert np.ptp(values) / values.mean() < 1e-8
    assert energies[1].dirichlet == pytest.approx(sobolev_constants(3).S_T ** 2, rel=1e-6)


@pytest.mark.parametrize("dim", [3, 4, 5])
def test_constants_are_scale_invariant(dim):
    unit, wide = sobolev_constants(dim), sobolev_constants(dim, 3.0)
    assert wide.S == pytest.approx(unit.S, rel=1e-8)
    assert wide.S_T == pytest.approx(unit.S_T, rel=1e-8)


@pytest.mark.parametrize("dim", [3, 4, 5])
def test_bubbles_lie_on_limit_nehari_set(dim):
    interior = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.INTERIOR, dim=dim, eps=1.0))
    trace = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.TRACE, dim=dim, eps=1.0))
    corner = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.CORNER, dim=dim, eps=1.0))
    assert interior.dirichlet == pytest.approx(interior.volume_nl, rel=1e-8)
    assert trace.dirichlet == pytest.approx(trace.boundary_nl, rel=1e-8)
    assert corner.dirichlet == pytest.approx(corner.volume_nl + corner.boundary_nl, rel=1e-8)


@pytest.mark.parametrize("dim", [3, 5])
def test_ground_state_level_is_scale_invariant(dim):
    assert ground_state_level(dim, 0.5) == pytest.approx(ground_state_level(dim), rel=1e-8)


@pytest.mark.parametrize("dim", range(3, 8))
def test_corner_level_below_volume_threshold(dim):
    c_inf = ground_state_level(dim)
    assert 0 < c_inf < volume_threshold(dim)
    assert trace_threshold(dim) > 0


def test_dimension_below_three_rejected():
    with pytest.raises(InvalidInput):
        sobolev_constants(2)
