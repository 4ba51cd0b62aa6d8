import argparse
import logging
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from commands import bubbles, constants, identities, lemmas, solve, thresholds
from common.enum import CommandName, ExitStatus, ReportFormat
from common.exceptions import CampaignException, ConfigError, NumericalError
from config import settings
from reports import emit_report
from schemas import CampaignConfig, VerdictRecord
from services import (
    aggregate_verdict,
    build_campaign,
    check,
    load_campaign_file,
    parse_dims,
    parse_floats,
    parse_grid,
    parse_words,
    prepare_output_dir,
    tolerance_overrides,
)

logger = logging.getLogger(__name__)

COMMANDS = {
    CommandName.CONSTANTS: constants.run,
    CommandName.BUBBLES: bubbles.run,
    CommandName.IDENTITIES: identities.run,
    CommandName.LEMMAS: lemmas.run,
    CommandName.THRESHOLDS: thresholds.run,
    CommandName.SOLVE: solve.run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critical-neumann",
        description="Verification campaigns and radial solves for the critical Neumann problem",
    )
    parser.add_argument("command", choices=[name.value for name in CommandName])
    parser.add_argument("--config", help="campaign file with [campaign], [boundary], [window], [solver], [tolerances]")
    parser.add_argument("--dims", help='dimensions, "4..10" or "3,4,5"')
    parser.add_argument("--eps-min", type=float)
    parser.add_argument("--eps-max", type=float)
    parser.add_argument("--eps-points", type=int)
    parser.add_argument("--eps", type=float, dest="threshold_eps", help="eps for threshold gaps")
    parser.add_argument("--curvature", help="principal curvatures, one value or N-1 values")
    parser.add_argument("--curvature-bounds", help="lower,upper bound on the curvatures")
    parser.add_argument("--kappa", type=float, help="coefficient of the |x'|^(5/2) boundary perturbation")
    parser.add_argument("--patch-radius", type=float)
    parser.add_argument("--r", dest="volume_exponents", help='volume exponents, numbers or "crit"')
    parser.add_argument("--q", dest="trace_exponents", help='boundary exponents, numbers or "crit"')
    parser.add_argument("--grid", dest="exponent_grid", help='explicit pairs "r:q,r:q"')
    parser.add_argument("--radius", type=float)
    parser.add_argument("--mesh", type=int, dest="mesh_size")
    parser.add_argument("--tol", type=float, dest="tol_grad")
    parser.add_argument("--nodes", type=int, dest="node_count", help="highest nodal count of the solve ladder")
    parser.add_argument("--lemma", dest="lemmas", help="comma separated lemma ids")
    parser.add_argument("--out", dest="out_dir")
    parser.add_argument("--format", dest="report_format", choices=[fmt.value for fmt in ReportFormat])
    parser.add_argument("--workers", type=int)
    parser.add_argument("--log-level")
    return parser


def campaign_values(args: argparse.Namespace) -> Dict[str, object]:
    """Campaign-file values overridden by command-line flags."""
    values = load_campaign_file(args.config) if args.config else {}
    values["command"] = args.command
    flags = {
        "dims": parse_dims,
        "curvatures": parse_floats,
        "curvature_bounds": parse_floats,
        "volume_exponents": parse_words,
        "trace_exponents": parse_words,
        "exponent_grid": parse_grid,
        "lemmas": parse_words,
    }
    for key in (
        "dims", "eps_min", "eps_max", "eps_points", "threshold_eps", "curvatures", "curvature_bounds",
        "kappa", "patch_radius", "volume_exponents", "trace_exponents", "exponent_grid", "radius",
        "mesh_size", "tol_grad", "node_count", "lemmas", "out_dir", "report_format",
    ):
        raw = getattr(args, "curvature" if key == "curvatures" else key)
        if raw is None:
            continue
        values[key] = flags[key](raw) if key in flags else raw
    if "dims" not in values:
        raise ConfigError("no dimensions given, use --dims or a campaign file")
    return values


def run_campaign(campaign: CampaignConfig) -> ExitStatus:
    """Run one command, write its tables and the JSON verdict, return the exit status."""
    out_dir = prepare_output_dir(campaign.out_dir)
    with tolerance_overrides(campaign.tolerance_overrides):
        try:
            outcome = COMMANDS[campaign.command](campaign)
        except NumericalError as exc:
            logger.error("%s failed: %s", campaign.command.value, exc.detail)
            record = VerdictRecord(
                command=campaign.command,
                status=ExitStatus.CHECK_FAILED,
                checks=[check(campaign.command.value, False, detail=exc.detail)],
            )
            emit_report(record, ReportFormat.JSON, out_dir / f"verdict_{campaign.command.value}.json")
            return ExitStatus.CHECK_FAILED

    extension = campaign.report_format.value
    files: List[str] = []
    for stem, rows in outcome.tables.items():
        path = emit_report(rows, campaign.report_format, out_dir / f"{stem}.{extension}")
        files.append(path.name)

    status = aggregate_verdict(outcome.checks)
    record = VerdictRecord(command=campaign.command, status=status, checks=outcome.checks, files=files)
    emit_report(record, ReportFormat.JSON, out_dir / f"verdict_{campaign.command.value}.json")
    for failed in record.failed:
        logger.warning("check %s failed (N=%s): %s", failed.name, failed.dim, failed.detail)
    logger.info("%s: %d checks, %d failed", campaign.command.value, len(record.checks), len(record.failed))
    return status


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.workers:
        settings.WORKERS = args.workers
    try:
        campaign = build_campaign(campaign_values(args))
        return int(run_campaign(campaign))
    except ConfigError as exc:
        logger.error("configuration error: %s", exc.detail)
        return int(ExitStatus.CONFIG_ERROR)
    except ValidationError as exc:
        logger.error("configuration error: %s", exc)
        return int(ExitStatus.CONFIG_ERROR)
    except CampaignException as exc:
        logger.error("%s", exc.detail)
        return int(exc.status_code)
    except OSError as exc:
        logger.error("cannot write reports: %s", exc)
        return int(ExitStatus.CONFIG_ERROR)


if __name__ == "__main__":
    sys.exit(main())
