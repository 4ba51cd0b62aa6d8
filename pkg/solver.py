"""Radial critical points of the Neumann energy on a ball.

The energy is discretised by finite volumes on a graded mesh: the Dirichlet
term uses the midpoint rule on each element, the mass and volume
nonlinearity use exact dual-cell volumes, and the boundary term is the exact
sphere area at rho = R. Ground states come from a Sobolev-gradient descent on
the Nehari manifold followed by a Newton polish with the tridiagonal Hessian.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np
from scipy import linalg, optimize

from bubbles import ground_state_level, sobolev_constants, trace_threshold, volume_threshold
from common.enum import Regime
from common.exceptions import ConvergenceError, InvalidInput, NodalStructureLost, NoNontrivialSolution
from config import settings
from quadrature import unit_sphere_area
from schemas import (
    DiscreteField,
    EnergyBreakdown,
    MountainPassResult,
    RadialMesh,
    SolutionResiduals,
    SolverConfig,
    ThresholdReport,
)

logger = logging.getLogger(__name__)

ARMIJO = 1e-4


def graded_mesh(radius: float, size: int, grading: Optional[float] = None) -> RadialMesh:
    """Nodes rho = R (xi - beta sin(2 pi xi) / (2 pi)), refined at both ends."""
    grading = settings.MESH_GRADING if grading is None else grading
    if not 0 <= grading < 1:
        raise InvalidInput("mesh grading must lie in [0, 1)")
    xi = np.linspace(0.0, 1.0, size + 1)
    nodes = radius * (xi - grading * np.sin(2 * math.pi * xi) / (2 * math.pi))
    nodes[0], nodes[-1] = 0.0, radius
    return RadialMesh(nodes=nodes)


class RadialEnergy:
    def __init__(self, cfg: SolverConfig, mesh: RadialMesh):
        if abs(mesh.radius - cfg.radius) > 1e-12 * cfg.radius:
            raise InvalidInput(f"mesh radius {mesh.radius:g} does not match R = {cfg.radius:g}")
        dim = cfg.dim
        nodes = mesh.nodes
        sigma = unit_sphere_area(dim)
        mids = 0.5 * (nodes[1:] + nodes[:-1])
        edges = np.concatenate([[0.0], mids, [nodes[-1]]])
        self.cfg = cfg
        self.mesh = mesh
        self.coupling = sigma * mids ** (dim - 1) / np.diff(nodes)
        self.weights = sigma * (edges[1:] ** dim - edges[:-1] ** dim) / dim
        self.surface = sigma * nodes[-1] ** (dim - 1)
        self.r_exp = cfg.r_exp
        self.q_exp = cfg.q_exp
        self._gram = self._bands(self.weights.copy())

    def _bands(self, diagonal: np.ndarray) -> np.ndarray:
        bands = np.zeros((3, diagonal.size))
        diagonal[:-1] += self.coupling
        diagonal[1:] += self.coupling
        bands[0, 1:] = -self.coupling
        bands[1] = diagonal
        bands[2, :-1] = -self.coupling
        return bands

    def _check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.weights.shape:
            raise InvalidInput(f"field has {values.size} values, mesh has {self.weights.size} nodes")
        return values

    def components(self, values):
        values = self._check(values)
        dirichlet = float(self.coupling @ np.diff(values) ** 2)
        mass = float(self.weights @ values**2)
        volume = float(self.weights @ np.abs(values) ** self.r_exp)
        boundary = float(self.surface * abs(values[-1]) ** self.q_exp)
        return dirichlet, mass, volume, boundary

    def energy(self, values) -> float:
        dirichlet, mass, volume, boundary = self.components(values)
        return 0.5 * (dirichlet + mass) - volume / self.r_exp - boundary / self.q_exp

    def gradient(self, values) -> np.ndarray:
        values = self._check(values)
        flux = self.coupling * np.diff(values)
        grad = self.weights * (values - np.abs(values) ** (self.r_exp - 2) * values)
        grad[:-1] -= flux
        grad[1:] += flux
        grad[-1] -= self.surface * abs(values[-1]) ** (self.q_exp - 2) * values[-1]
        return grad

    def hessian_bands(self, values) -> np.ndarray:
        values = self._check(values)
        diagonal = self.weights * (1.0 - (self.r_exp - 1) * np.abs(values) ** (self.r_exp - 2))
        bands = self._bands(diagonal)
        bands[1, -1] -= self.surface * (self.q_exp - 1) * abs(values[-1]) ** (self.q_exp - 2)
        return bands

    def riesz(self, grad: np.ndarray) -> np.ndarray:
        """H1 representer of a Euclidean gradient."""
        return linalg.solve_banded((1, 1), self._gram, grad)

    def dual_norm(self, grad: np.ndarray) -> float:
        return math.sqrt(max(float(grad @ self.riesz(grad)), 0.0))

    def h1_norm(self, values) -> float:
        dirichlet, mass, _, _ = self.components(values)
        return math.sqrt(dirichlet + mass)


def _energy_for(field: DiscreteField, cfg: SolverConfig) -> RadialEnergy:
    return RadialEnergy(cfg, field.mesh)


def assemble_energy(field: DiscreteField, cfg: SolverConfig) -> EnergyBreakdown:
    dirichlet, mass, volume, boundary = _energy_for(field, cfg).components(field.values)
    return EnergyBreakdown(
        dirichlet=dirichlet, mass=mass, volume_nl=volume, boundary_nl=boundary,
        r_exp=cfg.r_exp, q_exp=cfg.q_exp,
    )


def energy_gradient(field: DiscreteField, cfg: SolverConfig) -> DiscreteField:
    """Euclidean gradient dI/du_i of the discrete energy."""
    grad = _energy_for(field, cfg).gradient(field.values)
    return DiscreteField(mesh=field.mesh, values=grad)


def riesz_gradient(field: DiscreteField, cfg: SolverConfig) -> DiscreteField:
    energy = _energy_for(field, cfg)
    return DiscreteField(mesh=field.mesh, values=energy.riesz(energy.gradient(field.values)))


def _fibering_scale(energy: RadialEnergy, values: np.ndarray, start: float = 1.0) -> float:
    """Maximiser of t -> I(t u) by safeguarded Newton on its derivative."""
    dirichlet, mass, volume, boundary = energy.components(values)
    quadratic = dirichlet + mass
    if volume + boundary <= 0.0 or quadratic <= 0.0:
        raise InvalidInput("the fibering map needs a nontrivial field")
    r_exp, q_exp = energy.r_exp, energy.q_exp

    def slope(t):
        return quadratic - t ** (r_exp - 2) * volume - t ** (q_exp - 2) * boundary

    def curvature(t):
        return -(r_exp - 2) * t ** (r_exp - 3) * volume - (q_exp - 2) * t ** (q_exp - 3) * boundary

    low, high = 0.0, max(start, 1.0)
    while slope(high) > 0:
        low, high = high, 2 * high
    t = min(max(start, low), high)
    for _ in range(200):
        value = slope(t)
        if value > 0:
            low = t
        else:
            high = t
        candidate = t - value / curvature(t)
        if not low < candidate < high:
            candidate = 0.5 * (low + high)
        if abs(candidate - t) <= 1e-15 * t:
            return candidate
        t = candidate
    return t


def nehari_scale(field: DiscreteField, cfg: SolverConfig) -> float:
    if not np.any(field.values):
        raise InvalidInput("zero field has no Nehari scale")
    return _fibering_scale(_energy_for(field, cfg), field.values)


def count_sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values[values != 0])
    return int(np.sum(signs[1:] != signs[:-1]))


def _project(energy: RadialEnergy, values: np.ndarray) -> np.ndarray:
    if energy.h1_norm(values) < 1e-12:
        raise NoNontrivialSolution("no nontrivial solution found from this start")
    return _fibering_scale(energy, values) * values


def _nodal_project(energy: RadialEnergy, values: np.ndarray, node_count: int) -> np.ndarray:
    """Put every nodal piece of the field on its own Nehari constraint."""
    signs = np.sign(values)
    signs[signs == 0] = 1
    cuts = np.nonzero(np.diff(signs))[0] + 1
    if len(cuts) != node_count:
        raise NodalStructureLost(f"field has {len(cuts)} sign changes, expected {node_count}")
    pieces = np.zeros((node_count + 1, values.size))
    for row, segment in enumerate(np.split(np.arange(values.size), cuts)):
        pieces[row, segment] = values[segment]

    def negative_level(t):
        return -energy.energy(t @ pieces)

    def negative_slope(t):
        return -(pieces @ energy.gradient(t @ pieces))

    start = np.array([_fibering_scale(energy, piece) for piece in pieces])
    result = optimize.minimize(
        negative_level,
        start,
        jac=negative_slope,
        method="L-BFGS-B",
        bounds=[(1e-8, None)] * len(start),
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500},
    )
    return result.x @ pieces


def _nehari_descent(energy: RadialEnergy, values: np.ndarray, node_count: Optional[int] = None):
    if node_count is None:
        def project(v):
            return _project(energy, v)
    else:
        def project(v):
            return _nodal_project(energy, v, node_count)

    values = project(values)
    level = energy.energy(values)
    step = 1.0
    for iteration in range(settings.MAX_DESCENT_ITER):
        grad = energy.gradient(values)
        direction = energy.riesz(grad)
        norm_sq = float(grad @ direction)
        logger.debug("descent %d: level %.12g, gradient %.3g", iteration, level, math.sqrt(max(norm_sq, 0)))
        if norm_sq < settings.NEWTON_SWITCH**2:
            return values, iteration
        while True:
            try:
                trial = project(values - step * direction)
                trial_level = energy.energy(trial)
            except NodalStructureLost:
                trial_level = math.inf
            if trial_level <= level - ARMIJO * step * norm_sq:
                break
            step *= 0.5
            if step < 1e-12:
                raise ConvergenceError(f"line search failed at descent step {iteration}")
        values, level = trial, trial_level
        step = min(2 * step, 4.0)
    raise ConvergenceError(f"descent did not reach {settings.NEWTON_SWITCH:g} in {settings.MAX_DESCENT_ITER} steps")


def _newton_polish(energy: RadialEnergy, values: np.ndarray, tol: float):
    grad = energy.gradient(values)
    norm = energy.dual_norm(grad)
    for iteration in range(settings.MAX_NEWTON_ITER):
        if norm <= tol:
            return values, norm, iteration
        delta = linalg.solve_banded((1, 1), energy.hessian_bands(values), grad)
        damping = 1.0
        while True:
            trial = values - damping * delta
            trial_grad = energy.gradient(trial)
            trial_norm = energy.dual_norm(trial_grad)
            if trial_norm < norm or damping < 1e-3:
                break
            damping *= 0.5
        values, grad, norm = trial, trial_grad, trial_norm
        logger.debug("newton %d: gradient %.3g", iteration, norm)
    if norm <= tol:
        return values, norm, settings.MAX_NEWTON_ITER
    raise ConvergenceError(f"Newton polish stalled at gradient norm {norm:.3g}")


def _result(energy: RadialEnergy, values: np.ndarray, norm: float, iterations: int) -> MountainPassResult:
    if energy.h1_norm(values) < 1e-10:
        raise NoNontrivialSolution("iteration collapsed to the zero field")
    grad = energy.gradient(values)
    return MountainPassResult(
        field=DiscreteField(mesh=energy.mesh, values=values),
        level=energy.energy(values),
        grad_norm=norm,
        nehari_residual=float(grad @ values),
        h1_norm=energy.h1_norm(values),
        iterations=iterations,
        node_count=count_sign_changes(values),
    )


def _solve_from(energy: RadialEnergy, start: np.ndarray, node_count: Optional[int] = None) -> MountainPassResult:
    values, descent_steps = _nehari_descent(energy, start, node_count)
    values, norm, newton_steps = _newton_polish(energy, values, energy.cfg.tol_grad)
    result = _result(energy, values, norm, descent_steps + newton_steps)
    logger.info(
        "solve N=%d r=%g q=%g: level %.12g, gradient %.3g, %d zeros",
        energy.cfg.dim, energy.cfg.r_exp, energy.cfg.q_exp, result.level, norm, result.node_count,
    )
    return result


def default_starts(mesh: RadialMesh, count: Optional[int] = None) -> List[np.ndarray]:
    """Positive multistart profiles."""
    count = settings.MULTISTART if count is None else count
    x = mesh.nodes / mesh.radius
    profiles = [np.ones_like(x), 1 + x**2, np.exp(-(x**2)), 1 + x**4, 2 - x]
    return profiles[: max(1, count)]


def _better(candidate: MountainPassResult, best: Optional[MountainPassResult]) -> bool:
    if best is None:
        return True
    if candidate.level < best.level - settings.TIE_TOL:
        return True
    return abs(candidate.level - best.level) <= settings.TIE_TOL and candidate.h1_norm < best.h1_norm


def find_ground_state(cfg: SolverConfig, init: Optional[DiscreteField] = None) -> MountainPassResult:
    """Lowest Nehari level over the start set; ties go to the smaller H1 norm."""
    mesh = init.mesh if init is not None else graded_mesh(cfg.radius, cfg.mesh_size)
    energy = RadialEnergy(cfg, mesh)
    starts = [init.values] if init is not None else default_starts(mesh)

    def attempt(start):
        try:
            return _solve_from(energy, start)
        except ConvergenceError as exc:
            logger.warning("start discarded: %s", exc.detail)
            return exc

    if settings.WORKERS > 1:
        with ThreadPoolExecutor(max_workers=settings.WORKERS) as pool:
            outcomes = list(pool.map(attempt, starts))
    else:
        outcomes = [attempt(start) for start in starts]

    best = None
    for outcome in outcomes:
        if isinstance(outcome, MountainPassResult) and _better(outcome, best):
            best = outcome
    if best is None:
        raise outcomes[-1]
    return best


def find_excited_state(cfg: SolverConfig, node_count: int) -> MountainPassResult:
    """Radial solution with exactly `node_count` sign changes."""
    if node_count < 0:
        raise InvalidInput("node count must be nonnegative")
    if node_count == 0:
        return find_ground_state(cfg)
    if cfg.regime != Regime.SUBCRITICAL:
        raise InvalidInput("sign-changing solutions are computed only in the subcritical regime")
    mesh = graded_mesh(cfg.radius, cfg.mesh_size)
    energy = RadialEnergy(cfg, mesh)
    start = np.cos(math.pi * (node_count + 0.25) * mesh.nodes / cfg.radius)
    result = _solve_from(energy, start, node_count)
    if result.node_count != node_count:
        raise NodalStructureLost(f"solution has {result.node_count} sign changes, expected {node_count}")
    return result


def verify_solution(result: MountainPassResult, cfg: SolverConfig) -> SolutionResiduals:
    """Strong-form residuals of the radial equation and both boundary conditions."""
    nodes = result.field.mesh.nodes
    values = result.field.values
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        return SolutionResiduals(ode_residual_max=0.0, bc0_residual=0.0, bcR_residual=0.0, trivial=True)
    dim, r_exp, q_exp = cfg.dim, cfg.r_exp, cfg.q_exp

    def source(v):
        return np.abs(v) ** (r_exp - 2) * v

    slope = np.gradient(values, nodes, edge_order=2)
    left = nodes[1:-1] - nodes[:-2]
    right = nodes[2:] - nodes[1:-1]
    second = 2 * (
        values[:-2] / (left * (left + right))
        - values[1:-1] / (left * right)
        + values[2:] / (right * (left + right))
    )
    inner = -second - (dim - 1) / nodes[1:-1] * slope[1:-1] + values[1:-1] - source(values[1:-1])
    # Symmetric extension: u''(0) from the first node, Laplacian = N u''(0)
    centre = -dim * 2 * (values[1] - values[0]) / nodes[1] ** 2 + values[0] - source(values[0])
    flux = abs(values[-1]) ** (q_exp - 2) * values[-1]
    return SolutionResiduals(
        ode_residual_max=max(float(np.max(np.abs(inner))), abs(float(centre))) / scale,
        bc0_residual=abs(float(slope[0])) / scale,
        bcR_residual=abs(float(slope[-1] - flux)) / scale,
    )


def threshold_report(result: MountainPassResult, cfg: SolverConfig) -> ThresholdReport:
    dim = cfg.dim
    constants = sobolev_constants(dim)
    c_inf = ground_state_level(dim)
    volume = volume_threshold(dim, constants)
    regime = cfg.regime
    note = None
    if regime == Regime.SUBCRITICAL:
        threshold = math.inf
        note = "+∞ (global PS)"
    elif regime == Regime.VOLUME_CRITICAL:
        threshold = volume
    elif regime == Regime.TRACE_CRITICAL:
        threshold = trace_threshold(dim, constants)
    else:
        threshold = c_inf
    return ThresholdReport(
        regime=regime,
        dim=dim,
        S=constants.S,
        S_T=constants.S_T,
        c_inf=c_inf,
        threshold=threshold,
        level=result.level,
        margin=threshold - result.level,
        threshold_note=note,
        ground_below_volume_threshold=c_inf < volume,
    )
