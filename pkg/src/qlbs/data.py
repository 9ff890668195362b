"""CSV-backed datasets for the command-line tools.

Files are plain RFC-4180-style CSV with a mandatory header row and purely
numeric cells; malformed input errors name the offending row and column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Named numeric columns in row-major storage."""

    columns: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.columns):
            raise ValueError("rows must be a 2-D array matching the column names")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise KeyError(
                f"no column {name!r}; available: {', '.join(self.columns)}"
            ) from None
        return self.rows[:, j]

    def matrix(self, names: list[str]) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names]) if names else np.empty((self.n, 0))


def load_csv(path: str | Path) -> Dataset:
    """Read a numeric CSV with a header row.

    Raises ValueError naming the first bad cell (1-based data row, column
    name) on non-numeric or missing values, ragged rows, or an empty file.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if any(not h for h in header):
            raise ValueError(f"{path}: blank column name in header")
        width = len(header)
        data = []
        for i, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # tolerate blank trailing lines
            if len(row) != width:
                raise ValueError(
                    f"{path}: row {i} has {len(row)} cells, expected {width}"
                )
            parsed = []
            for name, cell in zip(header, row):
                cell = cell.strip()
                if not cell:
                    raise ValueError(f"{path}: missing value at row {i}, column {name!r}")
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric value {cell!r} at row {i}, column {name!r}"
                    ) from None
            data.append(parsed)
    if not data:
        raise ValueError(f"{path}: no data rows")
    return Dataset(columns=tuple(header), rows=np.asarray(data, dtype=float))


def write_csv(path: str | Path, columns: list[str], rows: np.ndarray) -> None:
    """Write a numeric CSV with full float precision (repr round-trips)."""
    rows = np.asarray(rows, dtype=float)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
