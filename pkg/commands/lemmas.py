import logging

from asymptotics import lemmas_for_dim, verify_lemma
from common.enum import LemmaId, Verdict
from common.exceptions import InvalidInput, NumericalError
from schemas import CampaignConfig, CommandOutcome, LemmaAuditRow, SweepRow
from services import check

logger = logging.getLogger(__name__)

# Lemmas with a subcritical boundary power among their items
Q_DEPENDENT = (LemmaId.INTERIOR_HIGH_DIM, LemmaId.INTERIOR_DIM3)


def _exponents(campaign: CampaignConfig, lemma: LemmaId):
    numeric = [value for value in campaign.trace_exponents if value != "crit"]
    if lemma in Q_DEPENDENT and numeric:
        return numeric
    return [None]


def run(campaign: CampaignConfig) -> CommandOutcome:
    """Fit every expansion item over the eps window and compare with its closed form."""
    outcome = CommandOutcome()
    audit, sweeps = [], []
    eps_list = campaign.eps_list()
    for dim in campaign.dims:
        model = campaign.boundary_model(dim)
        lemmas = [lemma for lemma in campaign.lemmas if lemma in lemmas_for_dim(dim)] or lemmas_for_dim(dim)
        for lemma in lemmas:
            for exponent_q in _exponents(campaign, lemma):
                try:
                    report = verify_lemma(lemma, dim, model, eps_list, exponent_q)
                except (NumericalError, InvalidInput) as exc:
                    outcome.checks.append(check(lemma.value, False, dim=dim, detail=exc.detail))
                    continue
                for item in report.items:
                    label = item.item if exponent_q is None else f"{item.item}(q={exponent_q:g})"
                    audit.append(LemmaAuditRow(
                        lemma=lemma, item=label, dim=dim, coeff_fitted=item.coeff_fitted,
                        coeff_closed_form=item.coeff_closed_form, rel_dev=item.rel_dev, verdict=item.verdict,
                    ))
                    sweeps += [
                        SweepRow(lemma=lemma, item=label, dim=dim, eps=sample.eps, value=sample.value)
                        for sample in item.samples
                    ]
                    outcome.checks.append(check(
                        f"{lemma.value}:{label}", item.verdict == Verdict.PASS, dim=dim,
                        value=item.coeff_fitted, reference=item.coeff_closed_form, detail=item.detail,
                    ))
    outcome.tables["lemma_audit"] = audit
    outcome.tables["lemma_sweeps"] = sweeps
    return outcome
