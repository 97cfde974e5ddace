from .model import DeltaBreakdown, ValidationModel, measure_delta, validation_model_eval
from .report import MetricsReport, measure, per_second, smooth
from .sweep import ABRow, ab_sweep, format_table
from .workload import (
    Generated,
    TraceEntry,
    TraceError,
    Workload,
    WorkloadKind,
    generate,
    read_trace,
    synthetic_trace,
    write_trace,
)

__all__ = [
    "ABRow",
    "DeltaBreakdown",
    "Generated",
    "MetricsReport",
    "TraceEntry",
    "TraceError",
    "ValidationModel",
    "Workload",
    "WorkloadKind",
    "ab_sweep",
    "format_table",
    "generate",
    "measure",
    "measure_delta",
    "per_second",
    "read_trace",
    "smooth",
    "synthetic_trace",
    "validation_model_eval",
    "write_trace",
]
