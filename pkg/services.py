import configparser
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from common.enum import ExitStatus, Verdict
from common.exceptions import ConfigError
from config import settings
from schemas import CampaignConfig, CheckResult

logger = logging.getLogger(__name__)

# Campaign-file keys that hold lists
LIST_KEYS = {"curvatures", "curvature_bounds"}
WORD_KEYS = {"lemmas", "volume_exponents", "trace_exponents"}


def parse_dims(text: str) -> List[int]:
    """Parse "4..10" as an inclusive range and "3,4,6" as a list."""
    text = text.strip()
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            if high < low:
                raise ConfigError(f"empty dimension range {text!r}")
            return list(range(low, high + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse dimensions {text!r}")


def parse_words(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_grid(text: str) -> List[Tuple[float, float]]:
    """Pairs written "r:q", comma separated."""
    try:
        pairs = []
        for part in parse_words(text):
            r_exp, q_exp = part.split(":")
            pairs.append((float(r_exp), float(q_exp)))
        return pairs
    except ValueError:
        raise ConfigError(f"cannot parse exponent grid {text!r}")


def parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}")


def load_campaign_file(path) -> Dict[str, object]:
    """Flatten the sections of a campaign file into CampaignConfig fields."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}")
    if not read:
        raise ConfigError(f"{path}: file not found")
    if not parser.sections():
        raise ConfigError(f"{path}: no sections found")

    values: Dict[str, object] = {}
    overrides: Dict[str, float] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == "tolerances":
                try:
                    overrides[key.upper()] = float(raw)
                except ValueError:
                    raise ConfigError(f"{path}: tolerance {key} is not a number")
            elif key == "dims":
                values[key] = parse_dims(raw)
            elif key == "exponent_grid":
                values[key] = parse_grid(raw)
            elif key in WORD_KEYS:
                values[key] = parse_words(raw)
            elif key in LIST_KEYS:
                values[key] = parse_floats(raw)
            else:
                values[key] = raw
    if overrides:
        values["tolerance_overrides"] = overrides
    logger.debug("campaign file %s: %s", path, values)
    return values


def build_campaign(values: Dict[str, object]) -> CampaignConfig:
    try:
        return CampaignConfig(**{key: value for key, value in values.items() if value is not None})
    except ValidationError as exc:
        raise ConfigError(f"invalid campaign: {exc}")


def prepare_output_dir(out_dir) -> Path:
    """Create the campaign output directory and make sure reports can be written there."""
    path = Path(out_dir)
    marker = path / ".write_check"
    try:
        path.mkdir(parents=True, exist_ok=True)
        marker.write_text("", encoding="utf-8")
        marker.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc}")
    return path


@contextmanager
def tolerance_overrides(overrides: Dict[str, float]):
    """Apply setting overrides for the duration of a campaign."""
    saved = {name: getattr(settings, name) for name in overrides}
    try:
        for name, value in overrides.items():
            setattr(settings, name, type(saved[name])(value))
        yield
    finally:
        for name, value in saved.items():
            setattr(settings, name, value)


def check(name: str, passed: bool, dim: Optional[int] = None, value=None, reference=None, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        dim=dim,
        value=value,
        reference=reference,
        verdict=Verdict.PASS if passed else Verdict.FAIL,
        detail=detail,
    )


def aggregate_verdict(checks: List[CheckResult]) -> ExitStatus:
    if any(item.verdict == Verdict.FAIL for item in checks):
        return ExitStatus.CHECK_FAILED
    return ExitStatus.OK
