"""Batch figure rendering for simulator study directories.

plotkit reads the CSV/JSON files that ``aimarketsim study <preset>``
writes and regenerates the experiment figures from them — it never
imports the simulator and never writes into a study directory, so it
can be pointed at any archive of study output.

>>> from plotkit import FigureSpec, render
>>> render(FigureSpec("out/studies/exp4", "exp4_bifurcation", "png"))
"""

from .figures import FIGURES, OUT_FORMATS, FigureSpec, render
from .studydir import (
    MissingTableError,
    PlotkitError,
    Study,
    Table,
    firm_series,
    read_json,
    read_table,
    shock_target,
    shock_times,
)

__version__ = "0.1.0"

__all__ = [
    "FIGURES",
    "OUT_FORMATS",
    "FigureSpec",
    "MissingTableError",
    "PlotkitError",
    "Study",
    "Table",
    "firm_series",
    "read_json",
    "read_table",
    "render",
    "shock_target",
    "shock_times",
]
