"""Parameter files: a small case-insensitive key = value format.

``#`` starts a comment that runs to the end of the line, blank lines are
skipped, keys are matched without regard to case, and string values may be
wrapped in single or double quotes.  Unknown keys are rejected rather than
ignored so that a typo cannot silently fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import InvalidValue, MalformedLine, UnknownKey
from .fitting import FitParams

__all__ = ["RunConfig", "parse_params", "read_key_values", "format_params"]

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class RunConfig:
    """Everything the command line driver needs for one run.

    Empty file names select the standard streams: input from stdin, spline
    output to stdout.  ``grid_output`` stays empty unless a tabulated grid
    file is wanted.
    """

    input_file: str = ""
    output_file: str = ""
    grid_output: str = ""
    grid_points: int = 512
    print_fit_info: bool = True
    fit: FitParams = field(default_factory=FitParams)

    def __post_init__(self):
        if self.grid_points < 2:
            raise InvalidValue(f"GridPoints must be at least 2, got {self.grid_points}")


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    return value


def read_key_values(text: str) -> dict[str, str]:
    """Parse the raw grammar into a lowercase-key mapping (last key wins)."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedLine(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise MalformedLine(f"line {lineno}: empty key in {raw!r}")
        out[key] = _unquote(value.strip())
    return out


def _to_int(key: str, value: str) -> int:
    try:
        return int(value, 10)
    except ValueError:
        raise InvalidValue(f"{key} needs an integer, got {value!r}") from None


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InvalidValue(f"{key} needs a number, got {value!r}") from None


def _to_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise InvalidValue(f"{key} needs true/false, got {value!r}")


_SCHEMA = {
    # key (lowercase) -> (config attribute, converter, fit-params flag)
    "splineorder": ("spline_order", _to_int, True),
    "datapointsmin": ("data_points_min", _to_int, True),
    "minlevel": ("min_level", _to_int, True),
    "threshold": ("threshold", _to_float, True),
    "thresholdmax": ("threshold_max", _to_float, True),
    "thresholdsteps": ("threshold_steps", _to_int, True),
    "usablebinfraction": ("usable_bin_fraction", _to_float, True),
    "jumpsuppression": ("jump_suppression", _to_bool, True),
    "abortifzero": ("abort_if_zero", _to_bool, True),
    "printfitinfo": ("print_fit_info", _to_bool, False),
    "gridoutput": ("grid_output", str, False),
    "gridpoints": ("grid_points", _to_int, False),
    "inputfile": ("input_file", str, False),
    "outputfile": ("output_file", str, False),
}

_CANONICAL = {
    "spline_order": "SplineOrder",
    "data_points_min": "DataPointsMin",
    "min_level": "MinLevel",
    "threshold": "Threshold",
    "threshold_max": "ThresholdMax",
    "threshold_steps": "ThresholdSteps",
    "usable_bin_fraction": "UsableBinFraction",
    "jump_suppression": "JumpSuppression",
    "abort_if_zero": "AbortIfZero",
    "print_fit_info": "PrintFitInfo",
    "grid_output": "GridOutput",
    "grid_points": "GridPoints",
    "input_file": "InputFile",
    "output_file": "OutputFile",
}


def parse_params(text: str) -> RunConfig:
    """Turn parameter-file text into a validated RunConfig.

    Raises MalformedLine for grammar problems, UnknownKey for keys outside
    the schema and InvalidValue for unconvertible or out-of-range values.
    """
    run_kwargs = {}
    fit_kwargs = {}
    for key, value in read_key_values(text).items():
        try:
            attr, convert, is_fit = _SCHEMA[key]
        except KeyError:
            raise UnknownKey(f"unknown parameter {key!r}") from None
        converted = value if convert is str else convert(_CANONICAL[attr], value)
        (fit_kwargs if is_fit else run_kwargs)[attr] = converted
    return RunConfig(fit=FitParams(**fit_kwargs), **run_kwargs)


def format_params(config: RunConfig) -> str:
    """Render a RunConfig as canonical parameter-file text.

    ``parse_params(format_params(c))`` reproduces ``c`` and formatting the
    result again is byte-identical.
    """
    lines = []
    values = {
        **{name: getattr(config, name) for name in
           ("input_file", "output_file", "grid_output", "grid_points", "print_fit_info")},
        **{f.name: getattr(config.fit, f.name) for f in fields(config.fit)},
    }
    order = [
        "input_file", "output_file", "grid_output", "grid_points", "print_fit_info",
        "spline_order", "data_points_min", "min_level", "threshold", "threshold_max",
        "threshold_steps", "usable_bin_fraction", "jump_suppression", "abort_if_zero",
    ]
    for name in order:
        value = values[name]
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        elif isinstance(value, str):
            rendered = f'"{value}"'
        else:
            rendered = str(value)
        lines.append(f"{_CANONICAL[name]} = {rendered}")
    return "\n".join(lines) + "\n"
