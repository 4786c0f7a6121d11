"""Offline figure scripts for armpc exports.

Reads the trace CSV, envelope JSON, sets JSON, sweep CSV, and learned
wind grid JSON that the armpc CLI and demos write, and renders the
four figure kinds: trajectory, envelope, sweep, quadrotor.
"""

from .io import (
    SchemaError,
    Trace,
    expected_trace_header,
    load_envelope,
    load_sets,
    load_sweep,
    load_trace,
    load_wind,
)
from .figures import (
    plot_envelope,
    plot_quadrotor,
    plot_sweep,
    plot_trajectory,
)
from .cli import PlotJob, main, render

__all__ = [
    "SchemaError",
    "Trace",
    "PlotJob",
    "expected_trace_header",
    "load_trace",
    "load_sets",
    "load_envelope",
    "load_sweep",
    "load_wind",
    "plot_trajectory",
    "plot_envelope",
    "plot_sweep",
    "plot_quadrotor",
    "render",
    "main",
]
