"""Batch figure rendering for trio-network sweep summaries.

Consumes the sweep summary CSV contract (game,N,x,trials,trapped,trap_frac,
trap_time_median,trap_time_q10,trap_time_q90,attach_count_mean,
visit_drop_median,seed) and renders publication-style figures.  Every figure
writes a machine-readable JSON sidecar carrying exactly the plotted numbers;
tests and downstream tooling read the sidecar, never pixels.
"""

from .figures import (
    FigureRequest,
    SUMMARY_HEADER,
    SchemaError,
    plot_scaling,
    plot_trap_fraction,
    plot_visit_survival,
    read_summary,
    render,
)

__version__ = "0.1.0"
