"""Tabular dataset ingestion and emission.

Format: UTF-8 CSV with header `x1,...,xd,value` followed by one row per
point. Floats are written in shortest round-trip form, so an emit/ingest
cycle is byte-exact.
"""

import csv

import numpy as np

from .errors import IngestionError


def _expected_header(dim):
    return [f"x{i}" for i in range(1, dim + 1)] + ["value"]


def ingest_table(path):
    """Read a dataset file into (points, values) arrays.

    The coordinate dimension is inferred from the header. Errors name the
    offending row (and column for non-numeric cells); row numbers are
    1-based and count the header.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise IngestionError(f"{path}: empty file, expected a header row")
    header = rows[0]
    if len(header) < 2 or header[-1] != "value" or header[:-1] != _expected_header(len(header) - 1)[:-1]:
        raise IngestionError(
            f"{path}: bad header {header!r}, expected x1,...,xd,value"
        )
    dim = len(header) - 1
    if len(rows) == 1:
        raise IngestionError(f"{path}: no data rows")
    points = np.zeros((len(rows) - 1, dim))
    values = np.zeros(len(rows) - 1)
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise IngestionError(
                f"{path}: row {r}: expected {dim + 1} columns, got {len(row)}"
            )
        for c, cell in enumerate(row):
            try:
                parsed = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: row {r}, column {header[c]}: not numeric: {cell!r}"
                ) from None
            if not np.isfinite(parsed):
                raise IngestionError(
                    f"{path}: row {r}, column {header[c]}: non-finite value {cell!r}"
                )
            if c < dim:
                points[r - 2, c] = parsed
            else:
                values[r - 2] = parsed
    return points, values


def emit_table(path, points, values):
    """Write (points, values) in the dataset format, shortest round-trip floats."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(points.shape[1]))
        for row, value in zip(points, values):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(value))])
