import math

import numpy as np
import pytest
from pydantic import ValidationError

from bubbles import ground_state_level, sobolev_constants, volume_threshold
from common.enum import BubbleKind, Regime
from common.exceptions import ConvergenceError, InvalidInput
from config import settings
from oracles import ShootingOracle
from profiles import BubbleProfile
from quadrature import halfball_volume
from schemas import BubbleSpec, DiscreteField, MountainPassResult, SolverConfig, critical_exponent, trace_exponent
from solver import (
    RadialEnergy,
    assemble_energy,
    energy_gradient,
    find_excited_state,
    find_ground_state,
    graded_mesh,
    nehari_scale,
    riesz_gradient,
    threshold_report,
    verify_solution,
)


def _field(cfg, values=None, func=None):
    mesh = graded_mesh(cfg.radius, cfg.mesh_size)
    if func is not None:
        values = func(mesh.nodes)
    return DiscreteField(mesh=mesh, values=np.asarray(values, dtype=float))


def _result(field, level=0.1):
    return MountainPassResult(
        field=field, level=level, grad_norm=0.0, nehari_residual=0.0, h1_norm=1.0, iterations=0
    )


def test_graded_mesh():
    mesh = graded_mesh(2.0, 100)
    assert mesh.nodes[0] == 0.0
    assert mesh.radius == 2.0
    assert np.all(np.diff(mesh.nodes) > 0)
    widths = np.diff(mesh.nodes)
    # refined at both ends
    assert widths[0] < widths[50] and widths[-1] < widths[50]
    with pytest.raises(InvalidInput):
        graded_mesh(1.0, 10, grading=1.0)


def test_solver_config_regimes():
    assert SolverConfig(dim=3, r_exp=3, q_exp=3).regime == Regime.SUBCRITICAL
    assert SolverConfig(dim=4, r_exp=4, q_exp=2.5).regime == Regime.VOLUME_CRITICAL
    assert SolverConfig(dim=3, r_exp=3, q_exp=4).regime == Regime.TRACE_CRITICAL
    assert SolverConfig(dim=5, r_exp=critical_exponent(5), q_exp=trace_exponent(5)).regime == Regime.DOUBLE_CRITICAL
    with pytest.raises(ValidationError):
        SolverConfig(dim=4, r_exp=4.5, q_exp=2.5)
    with pytest.raises(ValidationError):
        SolverConfig(dim=3, r_exp=3, q_exp=4.2)


def test_constant_field_energy():
    cfg = SolverConfig(dim=3, r_exp=3, q_exp=3, mesh_size=50)
    energy = assemble_energy(_field(cfg, func=np.ones_like), cfg)
    assert energy.dirichlet == 0.0
    assert energy.mass == pytest.approx(4 * math.pi / 3, rel=1e-12)
    assert energy.volume_nl == pytest.approx(4 * math.pi / 3, rel=1e-12)
    assert energy.boundary_nl == pytest.approx(4 * math.pi, rel=1e-12)
    assert energy.total == pytest.approx(2 * math.pi / 3 - 4 * math.pi / 9 - 4 * math.pi / 3, rel=1e-12)


def test_zero_field():
    cfg = SolverConfig(dim=4, r_exp=3, q_exp=2.5, mesh_size=40)
    field = _field(cfg, func=np.zeros_like)
    energy = assemble_energy(field, cfg)
    assert energy.total == 0.0
    assert not np.any(energy_gradient(field, cfg).values)
    with pytest.raises(InvalidInput):
        nehari_scale(field, cfg)
    residuals = verify_solution(_result(field), cfg)
    assert residuals.trivial
    assert residuals.ode_residual_max == 0.0


def test_mesh_mismatch_rejected():
    cfg = SolverConfig(dim=3, r_exp=3, q_exp=3, mesh_size=40)
    field = DiscreteField(mesh=graded_mesh(2.0, 40), values=np.ones(41))
    with pytest.raises(InvalidInput):
        assemble_energy(field, cfg)


def test_bubble_dirichlet_matches_quadrature():
    cfg = SolverConfig(dim=4, r_exp=4, q_exp=2.5, mesh_size=1000)
    profile = BubbleProfile(BubbleSpec(kind=BubbleKind.INTERIOR, dim=4, eps=0.1))
    energy = assemble_energy(_field(cfg, func=profile.value), cfg)
    reference = 2 * halfball_volume(profile.grad_sq, 4, 0.0, 1.0, 0.1)
    assert energy.dirichlet == pytest.approx(reference, rel=1e-2)


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    cfg = SolverConfig(dim=3 + seed % 3, r_exp=3.0, q_exp=2.5, mesh_size=20)
    field = _field(cfg, values=rng.uniform(0.5, 1.5, 21))
    energy = RadialEnergy(cfg, field.mesh)
    grad = energy_gradient(field, cfg).values
    step = 1e-6
    numeric = np.empty_like(grad)
    for i in range(grad.size):
        shift = np.zeros_like(grad)
        shift[i] = step
        numeric[i] = (energy.energy(field.values + shift) - energy.energy(field.values - shift)) / (2 * step)
    np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-6 * np.max(np.abs(grad)))


def test_hessian_matches_gradient_differences():
    cfg = SolverConfig(dim=3, r_exp=3.5, q_exp=3.0, mesh_size=12)
    values = np.linspace(0.6, 1.4, 13)
    energy = RadialEnergy(cfg, graded_mesh(1.0, 12))
    bands = energy.hessian_bands(values)
    dense = np.diag(bands[1]) + np.diag(bands[0, 1:], 1) + np.diag(bands[2, :-1], -1)
    step = 1e-6
    for i in range(values.size):
        shift = np.zeros_like(values)
        shift[i] = step
        column = (energy.gradient(values + shift) - energy.gradient(values - shift)) / (2 * step)
        np.testing.assert_allclose(dense[:, i], column, rtol=1e-6, atol=1e-6)


def test_riesz_gradient_represents_gradient():
    cfg = SolverConfig(dim=3, r_exp=3, q_exp=3, mesh_size=30)
    field = _field(cfg, func=lambda rho: 1 + rho**2)
    energy = RadialEnergy(cfg, field.mesh)
    representer = riesz_gradient(field, cfg).values
    stiffness = energy._gram
    product = stiffness[1] * representer
    product[:-1] += stiffness[0, 1:] * representer[1:]
    product[1:] += stiffness[2, :-1] * representer[:-1]
    np.testing.assert_allclose(product, energy_gradient(field, cfg).values, rtol=1e-10, atol=1e-12)


def test_nehari_scale():
    cfg = SolverConfig(dim=3, r_exp=3.5, q_exp=3.0, mesh_size=60)
    field = _field(cfg, func=lambda rho: 1 + 0.5 * rho**2)
    t_star = nehari_scale(field, cfg)
    on_manifold = DiscreteField(mesh=field.mesh, values=t_star * field.values)
    assert nehari_scale(on_manifold, cfg) == pytest.approx(1.0, abs=1e-8)
    grad = energy_gradient(on_manifold, cfg).values
    assert abs(grad @ on_manifold.values) < 1e-10
    doubled = DiscreteField(mesh=field.mesh, values=2 * on_manifold.values)
    assert nehari_scale(doubled, cfg) == pytest.approx(0.5, abs=1e-8)


def test_threshold_report_selects_regime_threshold():
    field = _field(SolverConfig(dim=4, r_exp=4, q_exp=2.5, mesh_size=20), func=np.ones_like)
    volume = threshold_report(_result(field), SolverConfig(dim=4, r_exp=4, q_exp=2.5, mesh_size=20))
    assert volume.regime == Regime.VOLUME_CRITICAL
    assert volume.threshold == pytest.approx(sobolev_constants(4).S ** 2 / 8)
    assert volume.margin == pytest.approx(volume.threshold - 0.1)

    subcritical = threshold_report(_result(field), SolverConfig(dim=4, r_exp=3, q_exp=2.5, mesh_size=20))
    assert subcritical.threshold == math.inf
    assert subcritical.threshold_note == "+∞ (global PS)"

    small = _field(SolverConfig(dim=3, r_exp=6, q_exp=4, mesh_size=20), func=np.ones_like)
    double = threshold_report(_result(small), SolverConfig(dim=3, r_exp=6, q_exp=4, mesh_size=20))
    assert double.threshold == pytest.approx(ground_state_level(3))
    assert double.ground_below_volume_threshold
    assert double.c_inf < volume_threshold(3)


def test_excited_state_needs_subcritical_regime():
    with pytest.raises(InvalidInput):
        find_excited_state(SolverConfig(dim=3, r_exp=6, q_exp=3, mesh_size=50), 1)
    with pytest.raises(InvalidInput):
        find_excited_state(SolverConfig(dim=3, r_exp=3, q_exp=3, mesh_size=50), -1)


def test_exhausted_budget_is_reported(monkeypatch):
    monkeypatch.setattr(settings, "MAX_DESCENT_ITER", 1)
    monkeypatch.setattr(settings, "NEWTON_SWITCH", 1e-14)
    with pytest.raises(ConvergenceError):
        find_ground_state(SolverConfig(dim=3, r_exp=3, q_exp=3, mesh_size=50))


@pytest.mark.slow
@pytest.mark.parametrize("r_exp, q_exp", [(3.0, 3.0), (4.0, 3.0), (3.0, 3.5)])
def test_ground_state_matches_shooting(r_exp, q_exp):
    cfg = SolverConfig(dim=3, r_exp=r_exp, q_exp=q_exp, mesh_size=2000)
    result = find_ground_state(cfg)
    reference = ShootingOracle(3, r_exp, q_exp).least_level(0)
    assert result.level == pytest.approx(reference, rel=1e-5)
    assert result.grad_norm < 1e-8
    assert abs(result.nehari_residual) <= cfg.tol_grad * result.h1_norm
    assert result.level > 0
    assert np.all(result.field.values > 0)
    assert result.node_count == 0


@pytest.mark.slow
def test_converged_solution_residuals():
    cfg = SolverConfig(dim=3, r_exp=3.0, q_exp=3.0, mesh_size=2000)
    residuals = verify_solution(find_ground_state(cfg), cfg)
    assert not residuals.trivial
    assert residuals.ode_residual_max < 1e-3
    assert residuals.bc0_residual < 1e-3
    assert residuals.bcR_residual < 1e-3


@pytest.mark.slow
def test_mesh_refinement_order():
    levels = [find_ground_state(SolverConfig(dim=3, r_exp=4.0, q_exp=3.0, mesh_size=m)).level for m in (200, 400, 800)]
    order = math.log2(abs(levels[0] - levels[1]) / abs(levels[1] - levels[2]))
    assert order >= 1.8


@pytest.mark.slow
def test_nodal_ladder():
    cfg = SolverConfig(dim=3, r_exp=3.0, q_exp=3.0, mesh_size=2000)
    ladder = [find_excited_state(cfg, k) for k in range(3)]
    assert [result.node_count for result in ladder] == [0, 1, 2]
    levels = [result.level for result in ladder]
    assert levels[0] < levels[1] < levels[2]
    assert ladder[0].level == pytest.approx(find_ground_state(cfg).level, rel=1e-8)
    assert levels[1] == pytest.approx(ShootingOracle(3, 3.0, 3.0).least_level(1), rel=1e-4)


@pytest.mark.slow
def test_double_critical_level_below_threshold():
    cfg = SolverConfig(dim=5, r_exp=critical_exponent(5), q_exp=trace_exponent(5))
    result = find_ground_state(cfg)
    report = threshold_report(result, cfg)
    assert 0 < result.level < ground_state_level(5)
    assert report.margin > 0
