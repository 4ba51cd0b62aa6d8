import logging

from asymptotics import default_subcritical_exponent, threshold_gap
from common.enum import Regime, Verdict
from common.exceptions import InvalidInput, NumericalError
from schemas import CampaignConfig, CommandOutcome, ThresholdRow
from services import check

logger = logging.getLogger(__name__)

CRITICAL_REGIMES = (Regime.VOLUME_CRITICAL, Regime.TRACE_CRITICAL, Regime.DOUBLE_CRITICAL)
T_EPS_BAND = (0.9, 1.1)


def default_eps(dim: int) -> float:
    return 1e-3 if dim == 3 else 1e-2


def _free_exponent(campaign: CampaignConfig, regime: Regime, dim: int):
    """Subcritical exponent a regime leaves free, from --q / --r when given."""
    values = campaign.trace_exponents if regime == Regime.VOLUME_CRITICAL else campaign.volume_exponents
    numeric = [value for value in values if value != "crit"]
    if regime != Regime.DOUBLE_CRITICAL and numeric:
        return numeric[0]
    return default_subcritical_exponent(regime, dim)


def run(campaign: CampaignConfig) -> CommandOutcome:
    """Maximum of the fibering map along each bubble against its regime threshold."""
    outcome = CommandOutcome()
    rows = []
    for dim in campaign.dims:
        model = campaign.boundary_model(dim)
        eps = campaign.threshold_eps or default_eps(dim)
        for regime in CRITICAL_REGIMES:
            name = f"{regime.value.lower()}_gap"
            try:
                gap = threshold_gap(regime, dim, model, eps, _free_exponent(campaign, regime, dim))
            except (NumericalError, InvalidInput) as exc:
                outcome.checks.append(check(name, False, dim=dim, detail=exc.detail))
                continue
            passed = gap.gap > 0 and T_EPS_BAND[0] < gap.t_eps < T_EPS_BAND[1]
            outcome.checks.append(check(
                name, passed, dim=dim, value=gap.sup_level, reference=gap.threshold,
                detail=f"eps={eps:g} t_eps={gap.t_eps:.8f}",
            ))
            rows.append(ThresholdRow(
                regime=regime, dim=dim, eps=eps, r=gap.r_exp, q=gap.q_exp, t_eps=gap.t_eps,
                sup_level=gap.sup_level, threshold=gap.threshold, gap=gap.gap,
                verdict=Verdict.PASS if passed else Verdict.FAIL,
            ))
    outcome.tables["thresholds"] = rows
    return outcome
