"""Read-only access to simulator study directories.

A *study directory* is what ``aimarketsim study <preset>`` writes:

``summary.json``    study identity plus the headline metric dict
``config.json``     run manifest: labels, seeds, overrides, base config
``metrics.csv``     one row per run, fixed column order
``runs/<label>/``   per-run traces (``firms.csv``, ``aggregates.csv``,
                    ``downstream.csv``, ``summary.json``, ``scenario.json``)
``<name>.csv``      preset tables (``bifurcation.csv``, ``phase.csv``, ...)

Everything in this module treats those files as an external contract:
plain CSV with a header row, and JSON documents.  Nothing is imported
from the simulator package and nothing is ever written back.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class PlotkitError(RuntimeError):
    """Raised when a study directory cannot back the requested figure."""


class MissingTableError(PlotkitError):
    """A file the figure needs is absent; the message names it."""

    def __init__(self, path):
        super().__init__(f"missing table: {path}")
        self.path = Path(path)


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class Table:
    """One CSV table with columns addressable by name.

    Cells are kept as the raw strings from the file; ``floats``/``ints``
    convert a column on demand so that text columns (labels, failure
    messages) never go through a numeric parse.
    """

    path: Path
    columns: tuple
    cells: dict = field(repr=False)

    @property
    def n_rows(self):
        if not self.columns:
            return 0
        return len(self.cells[self.columns[0]])

    def strings(self, name):
        self._check(name)
        return list(self.cells[name])

    def floats(self, name):
        """Column as a float array; empty cells become NaN."""
        self._check(name)
        out = np.empty(self.n_rows)
        for k, cell in enumerate(self.cells[name]):
            if cell == "":
                out[k] = np.nan
                continue
            try:
                out[k] = float(cell)
            except ValueError:
                raise PlotkitError(
                    f"{self.path}: column {name!r} has non-numeric "
                    f"cell {cell!r}") from None
        return out

    def ints(self, name):
        self._check(name)
        try:
            return np.array([int(cell) for cell in self.cells[name]], dtype=int)
        except ValueError as exc:
            raise PlotkitError(
                f"{self.path}: column {name!r} is not integral ({exc})") from None

    def _check(self, name):
        if name not in self.cells:
            raise PlotkitError(
                f"{self.path}: no column {name!r} "
                f"(has {', '.join(self.columns)})")


def read_table(path, require=()):
    """Load a CSV table, raising :class:`MissingTableError` if absent.

    ``require`` lists column names the caller is about to use; a schema
    mismatch is reported up front with the file named.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingTableError(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotkitError(f"{path}: empty file (no header row)") from None
        rows = list(reader)
    for k, row in enumerate(rows):
        if len(row) != len(header):
            raise PlotkitError(
                f"{path}: row {k + 2} has {len(row)} cells, "
                f"header has {len(header)}")
    missing = [name for name in require if name not in header]
    if missing:
        raise PlotkitError(
            f"{path}: missing required columns {', '.join(missing)}")
    cells = {name: [row[j] for row in rows] for j, name in enumerate(header)}
    return Table(path=path, columns=tuple(header), cells=cells)


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise MissingTableError(path)
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise PlotkitError(f"{path}: invalid JSON ({exc})") from None


# --------------------------------------------------------------------------
# study handle


class Study:
    """Handle on one study directory; every accessor is read-only."""

    def __init__(self, root):
        self.root = Path(root)

    def summary(self):
        return read_json(self.root / "summary.json")

    def headline(self):
        """The study's headline metric dict (may be empty)."""
        headline = self.summary().get("headline", {})
        if not isinstance(headline, dict):
            raise PlotkitError(
                f"{self.root / 'summary.json'}: headline is not a mapping")
        return headline

    def manifest(self):
        return read_json(self.root / "config.json")

    def base_config(self):
        """The study's base scenario dict from the manifest."""
        return self.manifest().get("base", {})

    def table(self, name, require=()):
        """A preset table ``<name>.csv`` at the study root."""
        return read_table(self.root / f"{name}.csv", require)

    def metrics(self, require=()):
        return read_table(self.root / "metrics.csv", require)

    def run_table(self, label, which, require=()):
        """``runs/<label>/<which>.csv`` for one run of the study."""
        return read_table(self.root / "runs" / label / f"{which}.csv", require)

    def scenario(self, label):
        return read_json(self.root / "runs" / label / "scenario.json")


# --------------------------------------------------------------------------
# shape helpers


def firm_series(firms, column):
    """Pivot the long-format firms table into ``(times, values)``.

    ``firms.csv`` stores one row per (step, firm), step-major.  The
    result has ``values[k, i]`` = ``column`` for firm ``i`` at step
    ``k`` and ``times`` of length ``n_steps``.
    """
    firm = firms.ints("firm")
    if firm.size == 0:
        raise PlotkitError(f"{firms.path}: no data rows")
    n = int(firm.max()) + 1
    if firm.size % n:
        raise PlotkitError(
            f"{firms.path}: {firm.size} rows is not a whole number of "
            f"{n}-firm blocks")
    grid = firm.reshape(-1, n)
    if not np.array_equal(grid, np.broadcast_to(np.arange(n), grid.shape)):
        raise PlotkitError(f"{firms.path}: firm rows out of step order")
    times = firms.floats("time").reshape(-1, n)[:, 0]
    values = firms.floats(column).reshape(-1, n)
    return times, values


def shock_times(scenario, kind=None):
    """Shock times recorded in a run's scenario.json, sorted ascending.

    ``kind`` filters to one shock kind (e.g. ``"price_override_factor"``).
    """
    times = [float(s["time"]) for s in scenario.get("shocks", ())
             if kind is None or s.get("kind") == kind]
    return sorted(times)


def shock_target(scenario):
    """The firm index a shock singles out, or None if none does."""
    for shock in scenario.get("shocks", ()):
        target = shock.get("target")
        if isinstance(target, int):
            return target
    return None
