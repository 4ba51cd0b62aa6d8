import logging

from bubbles import (
    bubble_energy_halfspace,
    ground_state_level,
    sobolev_constants,
    sobolev_constants_closed_form,
    volume_threshold,
)
from common.enum import BubbleKind, Verdict
from common.exceptions import NumericalError
from schemas import BubbleSpec, CampaignConfig, CommandOutcome, ConstantsRow
from services import check

logger = logging.getLogger(__name__)

CONSTANT_RTOL = 1e-8
DIRICHLET_RTOL = 1e-6


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / abs(reference)


def run(campaign: CampaignConfig) -> CommandOutcome:
    """Sobolev and trace constants, c_inf and the volume threshold per dimension."""
    outcome = CommandOutcome()
    rows = []
    for dim in campaign.dims:
        try:
            constants = sobolev_constants(dim)
            c_inf = ground_state_level(dim)
            threshold = volume_threshold(dim, constants)
            oracle = sobolev_constants_closed_form(dim)
            interior = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.INTERIOR, dim=dim, eps=1.0))
            trace = bubble_energy_halfspace(BubbleSpec(kind=BubbleKind.TRACE, dim=dim, eps=1.0))
        except NumericalError as exc:
            outcome.checks.append(check("constants", False, dim=dim, detail=exc.detail))
            continue

        ordered = c_inf < threshold
        outcome.checks += [
            check("c_inf_below_volume_threshold", ordered, dim=dim, value=c_inf, reference=threshold),
            check(
                "S_closed_form", _relative(constants.S, oracle.S) <= CONSTANT_RTOL,
                dim=dim, value=constants.S, reference=oracle.S,
            ),
            check(
                "S_T_closed_form", _relative(constants.S_T, oracle.S_T) <= CONSTANT_RTOL,
                dim=dim, value=constants.S_T, reference=oracle.S_T,
            ),
            check(
                "interior_dirichlet", _relative(interior.dirichlet, constants.S ** (dim / 2) / 2) <= DIRICHLET_RTOL,
                dim=dim, value=interior.dirichlet, reference=constants.S ** (dim / 2) / 2,
            ),
            check(
                "trace_dirichlet", _relative(trace.dirichlet, constants.S_T ** (dim - 1)) <= DIRICHLET_RTOL,
                dim=dim, value=trace.dirichlet, reference=constants.S_T ** (dim - 1),
            ),
        ]
        rows.append(ConstantsRow(
            dim=dim, S=constants.S, S_T=constants.S_T, c_inf=c_inf,
            volume_threshold=threshold, verdict=Verdict.PASS if ordered else Verdict.FAIL,
        ))
        logger.info("N=%d: S=%.12g S_T=%.12g c_inf=%.12g", dim, constants.S, constants.S_T, c_inf)
    outcome.tables["constants"] = rows
    return outcome
