import logging

import numpy as np
from pydantic import ValidationError

from common.enum import Regime
from common.exceptions import InvalidInput, NumericalError
from schemas import CampaignConfig, CommandOutcome, ProfileRow, SolveRow, SolverConfig
from services import check
from solver import find_excited_state, threshold_report, verify_solution

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-2


def profile_name(cfg: SolverConfig, node_count: int) -> str:
    return f"profile_N{cfg.dim}_r{cfg.r_exp:g}_q{cfg.q_exp:g}_k{node_count}"


def _ladder(campaign: CampaignConfig, cfg: SolverConfig) -> int:
    if cfg.regime != Regime.SUBCRITICAL and campaign.node_count:
        logger.warning("N=%d r=%g q=%g is critical, only the ground state is computed", cfg.dim, cfg.r_exp, cfg.q_exp)
        return 0
    return campaign.node_count


def run(campaign: CampaignConfig) -> CommandOutcome:
    """Ground state and nodal ladder for every (r, q) pair, with threshold margins."""
    outcome = CommandOutcome()
    rows = []
    for dim in campaign.dims:
        for r_exp, q_exp in campaign.exponent_pairs(dim):
            tag = f"r={r_exp:g} q={q_exp:g}"
            try:
                cfg = SolverConfig(
                    dim=dim, radius=campaign.radius, r_exp=r_exp, q_exp=q_exp,
                    mesh_size=campaign.mesh_size, tol_grad=campaign.tol_grad,
                )
            except ValidationError as exc:
                outcome.checks.append(check("solver_config", False, dim=dim, detail=f"{tag}: {exc}"))
                continue

            levels = []
            for node_count in range(_ladder(campaign, cfg) + 1):
                try:
                    result = find_excited_state(cfg, node_count)
                except (NumericalError, InvalidInput) as exc:
                    outcome.checks.append(check(f"solve_k{node_count}", False, dim=dim, detail=f"{tag}: {exc.detail}"))
                    break
                levels.append(result.level)
                residuals = verify_solution(result, cfg)
                outcome.checks += [
                    check(f"gradient_k{node_count}", result.grad_norm <= cfg.tol_grad, dim=dim,
                          value=result.grad_norm, reference=cfg.tol_grad, detail=tag),
                    check(f"residual_k{node_count}", residuals.ode_residual_max <= RESIDUAL_TOL, dim=dim,
                          value=residuals.ode_residual_max, detail=tag),
                ]
                outcome.tables[profile_name(cfg, node_count)] = [
                    ProfileRow(rho=rho, u=u) for rho, u in zip(result.field.mesh.nodes, result.field.values)
                ]
                if node_count:
                    continue

                report = threshold_report(result, cfg)
                outcome.checks.append(check("positive_ground_state", bool(np.all(result.field.values > 0)),
                                            dim=dim, detail=tag))
                if cfg.regime != Regime.SUBCRITICAL:
                    outcome.checks.append(check("below_threshold", report.margin > 0, dim=dim,
                                                value=report.level, reference=report.threshold, detail=tag))
                rows.append(SolveRow(
                    dim=dim, r=r_exp, q=q_exp, regime=cfg.regime, level=report.level,
                    threshold=report.threshold, margin=report.margin, grad_norm=result.grad_norm,
                ))
            if len(levels) > 1:
                outcome.checks.append(check("ladder_increasing", bool(np.all(np.diff(levels) > 0)),
                                            dim=dim, detail=f"{tag}: levels {levels}"))
    outcome.tables["solve"] = rows
    return outcome
