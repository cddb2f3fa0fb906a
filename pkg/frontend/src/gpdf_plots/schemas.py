"""Declared CSV schemas of the scenario outputs this package consumes.

The renderer never guesses at columns: each known file name carries the
exact header the producing side documents, missing columns are reported
by name, and unknown files are simply ignored.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# file name -> columns required by the figures drawn from it
SCHEMAS: dict[str, tuple[str, ...]] = {
    "trace_diagnostics.csv": ("k", "alpha", "t", "value_log", "classification"),
    "sweep.csv": ("R", "J_retained", "log_trace_k", "min_window"),
    "scattering.csv": ("t", "H1_pullback_increment", "D_1", "D_2", "D_3",
                       "bound_D_3"),
    "observables.csv": ("t", "M", "E", "H1", "Hdot1", "L4"),
    "lemma.csv": ("k", "log_sum", "c_fit"),
}

# columns that stay text; everything else is parsed as float
TEXT_COLUMNS = {"classification"}


class SchemaError(ValueError):
    """Input CSV does not match its documented schema."""


@dataclass(frozen=True)
class Table:
    path: Path
    columns: tuple[str, ...]
    rows: int

    # mapping column -> numpy array (float) or list of str
    data: dict

    @property
    def empty(self) -> bool:
        return self.rows == 0

    def col(self, name: str):
        return self.data[name]


def read_table(path: Path) -> Table:
    """Load a known CSV, validating its header against the schema."""
    path = Path(path)
    required = SCHEMAS.get(path.name)
    if required is None:
        raise SchemaError(f"{path.name}: no schema is declared for this file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: file has no header row") from None
        raw_rows = [row for row in reader if row]

    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(
            f"{path.name}: missing column{'s' if len(missing) > 1 else ''} "
            + ", ".join(repr(c) for c in missing)
        )

    data: dict = {}
    for name in required:
        idx = header.index(name)
        values = [row[idx] for row in raw_rows]
        if name in TEXT_COLUMNS:
            data[name] = values
        else:
            try:
                data[name] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise SchemaError(f"{path.name}: column {name!r}: {exc}") from None
    return Table(path=path, columns=tuple(required), rows=len(raw_rows), data=data)
