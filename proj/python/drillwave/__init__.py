"""Funnel-controlled drill-string simulation (python surface of the C++ core)."""

from ._core import (
    ConfigError,
    DelayBufferError,
    FunnelViolation,
    NumericalError,
    check_skew,
    error_transform,
    normalize_config,
    preset_json,
    run,
    shaping_p,
    solve_e_measured,
    trace_csv,
    validate,
)

__all__ = [
    "ConfigError",
    "DelayBufferError",
    "FunnelViolation",
    "NumericalError",
    "check_skew",
    "error_transform",
    "normalize_config",
    "preset_json",
    "run",
    "shaping_p",
    "solve_e_measured",
    "trace_csv",
    "validate",
]
