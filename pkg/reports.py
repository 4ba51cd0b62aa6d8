import csv
import io
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Sequence

from pydantic import BaseModel, ValidationError

from common.enum import ReportFormat
from common.exceptions import ConfigError
from schemas import VerdictRecord

logger = logging.getLogger(__name__)


def format_value(value) -> str:
    """Fixed CSV text for one cell; floats keep 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_ready(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {key: _json_ready(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(item) for item in value]
    return value


def render_csv(rows: Sequence[BaseModel]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    if rows:
        columns = list(type(rows[0]).model_fields)
        # Header
        writer.writerow(columns)
        for row in rows:
            data = row.model_dump()
            writer.writerow([format_value(data[column]) for column in columns])
    return output.getvalue()


def render_json(results) -> str:
    if isinstance(results, BaseModel):
        payload = results.model_dump()
    else:
        payload = [row.model_dump() for row in results]
    return json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n"


def emit_report(results, report_format: ReportFormat, path) -> Path:
    """Write rows as CSV, or rows or a single record as JSON; returns the file path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if report_format == ReportFormat.CSV:
        text = render_csv(list(results))
    else:
        text = render_json(results)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def load_report(path) -> VerdictRecord:
    """Parse a JSON verdict file back into its record."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return VerdictRecord.model_validate(payload)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(f"cannot read verdict {path}: {exc}")
