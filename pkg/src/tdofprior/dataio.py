"""CSV ingestion, flat config files and round-trippable result writers.

Input contract: UTF-8, one header row, numeric columns with '.' decimal
separator; any row with a non-numeric or missing cell is rejected with its
line number.  All floats are written with ``repr`` so every emitted file
parses back bit-exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "load_numeric_csv",
    "write_matrix_csv",
    "write_rows_csv",
    "parse_config_file",
]


def load_numeric_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a strict numeric CSV; returns (column names, n x d float matrix)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        names = [h.strip() for h in header]
        if not names or any(not n for n in names):
            raise DataError(f"{path}: blank column name in header")
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DataError(f"{path}: line {lineno}: expected {len(names)} cells, got {len(row)}")
            parsed = []
            for cell in row:
                text = cell.strip()
                if not text:
                    raise DataError(f"{path}: line {lineno}: missing value")
                try:
                    parsed.append(float(text))
                except ValueError:
                    raise DataError(f"{path}: line {lineno}: non-numeric cell {cell!r}") from None
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return names, np.asarray(rows, dtype=float)


def format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(c) for c in row])
    return buf.getvalue()


def write_matrix_csv(names: list[str], matrix: np.ndarray) -> str:
    return write_rows_csv(names, [list(row) for row in np.atleast_2d(matrix)])


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` config text; '#' starts a comment."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DataError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise DataError(f"{path}: line {lineno}: empty key")
        out[key] = value.strip()
    return out
