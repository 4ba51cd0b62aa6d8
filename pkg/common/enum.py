from enum import Enum, IntEnum


class BubbleKind(str, Enum):
    INTERIOR = "INTERIOR"
    TRACE = "TRACE"
    CORNER = "CORNER"


class QuantityTag(str, Enum):
    GRAD_SQ = "GRAD_SQ"
    VOLUME_CRIT = "VOLUME_CRIT"
    VOLUME_POWER = "VOLUME_POWER"
    BOUNDARY_Q = "BOUNDARY_Q"
    MASS_SQ = "MASS_SQ"


class SignCondition(str, Enum):
    TRACE_GAP = "TRACE_GAP"
    CORNER_GAP = "CORNER_GAP"


class ModelForm(str, Enum):
    LINEAR = "LINEAR"
    QUADRATIC = "QUADRATIC"
    LINEAR_PLUS_LOG = "LINEAR_PLUS_LOG"
    PURE_POWER = "PURE_POWER"


class LemmaId(str, Enum):
    INTERIOR_HIGH_DIM = "INTERIOR_HIGH_DIM"
    INTERIOR_DIM3 = "INTERIOR_DIM3"
    TRACE_HIGH_DIM = "TRACE_HIGH_DIM"
    TRACE_DIM3 = "TRACE_DIM3"
    CORNER_HIGH_DIM = "CORNER_HIGH_DIM"
    CORNER_DIM3 = "CORNER_DIM3"


class Regime(str, Enum):
    SUBCRITICAL = "SUBCRITICAL"
    VOLUME_CRITICAL = "VOLUME_CRITICAL"
    TRACE_CRITICAL = "TRACE_CRITICAL"
    DOUBLE_CRITICAL = "DOUBLE_CRITICAL"


class CommandName(str, Enum):
    CONSTANTS = "constants"
    BUBBLES = "bubbles"
    IDENTITIES = "identities"
    LEMMAS = "lemmas"
    THRESHOLDS = "thresholds"
    SOLVE = "solve"


class ReportFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class ExitStatus(IntEnum):
    OK = 0
    CHECK_FAILED = 1
    CONFIG_ERROR = 2


class Region(str, Enum):
    SLAB = "SLAB"
    DOMAIN = "DOMAIN"
    TRUNCATED = "TRUNCATED"
