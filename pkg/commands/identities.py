import logging

from common.enum import SignCondition, Verdict
from common.exceptions import InvalidInput, NumericalError
from config import settings
from quadrature import (
    corner_ratio_identity_check,
    sign_condition,
    sign_condition_closed_form,
    trace_power_identity_check,
)
from schemas import CampaignConfig, CommandOutcome, IdentityRow
from services import check

logger = logging.getLogger(__name__)


def _row(name, dim, lhs, rhs, rel_err, passed) -> IdentityRow:
    return IdentityRow(
        name=name, dim=dim, lhs=lhs, rhs=rhs, rel_err=rel_err,
        verdict=Verdict.PASS if passed else Verdict.FAIL,
    )


def run(campaign: CampaignConfig) -> CommandOutcome:
    """Beta-integral identities and both sign conditions for N >= 4."""
    outcome = CommandOutcome()
    rows = []
    for dim in campaign.dims:
        if dim < 4:
            logger.warning("identities are defined for N >= 4, skipping N=%d", dim)
            continue
        try:
            for identity in (trace_power_identity_check(dim), corner_ratio_identity_check(dim)):
                passed = identity.rel_err <= settings.IDENTITY_RTOL
                rows.append(_row(identity.name, dim, identity.lhs, identity.rhs, identity.rel_err, passed))
                outcome.checks.append(check(identity.name, passed, dim=dim, value=identity.lhs, reference=identity.rhs))

            model = campaign.boundary_model(dim)
            for which in SignCondition:
                value = sign_condition(which, dim, model)
                reduced = sign_condition_closed_form(which, dim, model)
                rel_err = abs(value - reduced) / abs(reduced)
                passed = value < 0 and rel_err <= settings.SIGN_RTOL
                rows.append(_row(which.value, dim, value, reduced, rel_err, passed))
                outcome.checks.append(check(which.value, passed, dim=dim, value=value, reference=reduced))
        except (NumericalError, InvalidInput) as exc:
            outcome.checks.append(check("identities", False, dim=dim, detail=exc.detail))
    outcome.tables["identities"] = rows
    return outcome
