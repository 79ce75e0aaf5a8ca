# utils/params.py

import logging
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigParseError, ValidationError

logger = logging.getLogger(__name__)

# =============================================
# === PARAMETER TYPES ========================
# =============================================

@dataclass(frozen=True)
class OperationTimes:
    """Operation latencies in microseconds (t_mv and t_cb are per cell)."""
    t_1q: float = 1.0
    t_2q: float = 20.0
    t_mv: float = 0.2
    t_ms: float = 100.0
    t_gen: float = 122.0
    t_tprt: float = 122.0
    t_prfy: float = 121.0
    t_cb: float = 0.002

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{f.name} must be a non-negative time, got {value}")


@dataclass(frozen=True)
class ErrorRates:
    """Per-operation error probabilities (p_mv is per cell moved)."""
    p_1q: float = 1e-8
    p_2q: float = 1e-7
    p_mv: float = 1e-6
    p_ms: float = 1e-8

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{f.name} must be a probability, got {value}")


@dataclass(frozen=True)
class ThresholdPolicy:
    f_min: float = 1 - 7.5e-5

    def __post_init__(self):
        if not (0.0 < self.f_min < 1.0):
            raise ValidationError(f"f_min must lie strictly between 0 and 1, got {self.f_min}")


@dataclass(frozen=True)
class ParameterSet:
    times: OperationTimes = field(default_factory=OperationTimes)
    errors: ErrorRates = field(default_factory=ErrorRates)
    threshold: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    f_zero: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.f_zero <= 1.0):
            raise ValidationError(f"f_zero must be a fidelity, got {self.f_zero}")


def default_ion_trap():
    """Ion-trap operation times and error rates with f_min = 1 - 7.5e-5."""
    return ParameterSet()


def with_uniform_error_rate(params, rate):
    """Returns params with p_1q, p_2q, p_mv and p_ms all set to `rate`."""
    return replace(params, errors=ErrorRates(p_1q=rate, p_2q=rate, p_mv=rate, p_ms=rate))


def noiseless(params=None):
    """Returns params with every error probability set to zero."""
    return with_uniform_error_rate(params or default_ion_trap(), 0.0)


# =============================================
# === CONFIG DOCUMENTS =======================
# =============================================

_TIME_KEYS = tuple(f.name for f in fields(OperationTimes))
_ERROR_KEYS = tuple(f.name for f in fields(ErrorRates))
CONFIG_KEYS = _TIME_KEYS + _ERROR_KEYS + ("f_min", "f_zero")


def load_config(text):
    """
    Parses a `key = value` parameter document.

    Blank lines and `#` comments are ignored; omitted keys keep the ion-trap
    defaults. Times loaded from a document must be strictly positive and error
    probabilities below one.

    Args:
        text (str): The configuration document.

    Returns:
        ParameterSet: The parsed parameters.
    """
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(number, raw, "expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigParseError(number, raw, f"unknown key '{key}'")
        if key in values:
            raise ConfigParseError(number, raw, f"duplicate key '{key}'")
        try:
            values[key] = float(value)
        except ValueError:
            raise ConfigParseError(number, raw, f"'{value}' is not a number") from None

    for key in _TIME_KEYS:
        if key in values and values[key] <= 0:
            raise ValidationError(f"{key} must be strictly positive, got {values[key]}")
    for key in _ERROR_KEYS:
        if key in values and values[key] >= 1.0:
            raise ValidationError(f"{key} must lie in [0, 1), got {values[key]}")

    defaults = default_ion_trap()
    times = replace(defaults.times, **{k: v for k, v in values.items() if k in _TIME_KEYS})
    errors = replace(defaults.errors, **{k: v for k, v in values.items() if k in _ERROR_KEYS})
    threshold = ThresholdPolicy(values.get("f_min", defaults.threshold.f_min))
    params = ParameterSet(times, errors, threshold, values.get("f_zero", defaults.f_zero))
    if values:
        logger.debug("Loaded %d parameter overrides: %s", len(values), sorted(values))
    return params


def load_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def dump_config(params):
    """Serializes a ParameterSet so that load_config(dump_config(p)) == p."""
    lines = ["# operation times (microseconds; t_mv and t_cb per cell)"]
    lines += [f"{key} = {getattr(params.times, key)!r}" for key in _TIME_KEYS]
    lines.append("# error probabilities (p_mv per cell)")
    lines += [f"{key} = {getattr(params.errors, key)!r}" for key in _ERROR_KEYS]
    lines.append("# fidelity policy")
    lines.append(f"f_min = {params.threshold.f_min!r}")
    lines.append(f"f_zero = {params.f_zero!r}")
    return "\n".join(lines) + "\n"
