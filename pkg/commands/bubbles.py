import logging

from bubbles import bubble_energy_halfspace, pde_residual, sample_points
from common.enum import BubbleKind
from common.exceptions import NumericalError
from schemas import BubbleRow, BubbleSpec, CampaignConfig, CommandOutcome
from services import check

logger = logging.getLogger(__name__)

BUBBLE_EPS = (0.25, 1.0, 4.0)
SAMPLE_COUNT = 200
RESIDUAL_TOL = 1e-9


def run(campaign: CampaignConfig) -> CommandOutcome:
    """Residuals and half-space energies of every bubble family."""
    outcome = CommandOutcome()
    rows = []
    for kind in BubbleKind:
        for dim in campaign.dims:
            for eps in BUBBLE_EPS:
                spec = BubbleSpec(kind=kind, dim=dim, eps=eps)
                name = f"{kind.value.lower()}_residual"
                residual = pde_residual(spec, sample_points(spec, SAMPLE_COUNT, "mixed"))
                worst = max(residual.interior_max, residual.boundary_max)
                outcome.checks.append(check(
                    name, worst < RESIDUAL_TOL, dim=dim, value=worst, reference=RESIDUAL_TOL, detail=f"eps={eps:g}",
                ))
                try:
                    energy = bubble_energy_halfspace(spec)
                except NumericalError as exc:
                    outcome.checks.append(check(f"{kind.value.lower()}_energy", False, dim=dim, detail=exc.detail))
                    continue
                rows.append(BubbleRow(
                    kind=kind, dim=dim, eps=eps,
                    interior_max=residual.interior_max, boundary_max=residual.boundary_max,
                    dirichlet=energy.dirichlet, volume_nl=energy.volume_nl,
                    boundary_nl=energy.boundary_nl, total=energy.total,
                ))
    outcome.tables["bubbles"] = rows
    return outcome
