"""Post-processing plots for tumorctrl run directories (read-only)."""

from .artifacts import ArtifactError, Field, RunIndex, index_run, \
    read_csv_table, read_field
from .plots import plot_diagnostics, plot_fields, plot_optim

__version__ = "0.1.0"
