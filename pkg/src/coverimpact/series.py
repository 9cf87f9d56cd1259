"""Coverage time series and its ``epoch,coverage`` CSV format."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError

CSV_HEADER = ("epoch", "coverage")


@dataclass(frozen=True)
class CoverageSeries:
    epochs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        epochs = np.asarray(self.epochs)
        values = np.asarray(self.values, dtype=np.float64)
        if epochs.ndim != 1 or values.ndim != 1:
            raise ParameterError("epochs and values must be 1-D")
        if len(epochs) != len(values):
            raise ParameterError(f"{len(epochs)} epochs but {len(values)} values")
        if len(values) < 1:
            raise ParameterError("a series needs at least one observation")
        if not np.issubdtype(epochs.dtype, np.integer):
            if not np.all(np.mod(epochs, 1) == 0):
                raise ParameterError("epochs must be integers")
        epochs = epochs.astype(np.int64)
        if np.any(np.diff(epochs) <= 0):
            raise ParameterError("epochs must be strictly increasing")
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_values(cls, values, start_epoch: int = 0) -> "CoverageSeries":
        values = np.asarray(values, dtype=np.float64)
        return cls(np.arange(start_epoch, start_epoch + len(values)), values)


def format_series_csv(series: CoverageSeries) -> str:
    lines = [",".join(CSV_HEADER)]
    for epoch, value in zip(series.epochs, series.values):
        lines.append("%d,%.6f" % (epoch, value))
    return "\n".join(lines) + "\n"


def write_series_csv(series: CoverageSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_series_csv(series))


def parse_series_csv(text: str, path=None) -> CoverageSeries:
    """Parse ``epoch,coverage`` CSV; rows may be in any order (sorted here)."""
    reader = csv.reader(io.StringIO(text))
    rows = []
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if not header_seen:
            if tuple(cell.strip() for cell in row) != CSV_HEADER:
                raise FormatError(f"expected header 'epoch,coverage', got {','.join(row)!r}", path, lineno)
            header_seen = True
            continue
        if len(row) != 2:
            raise FormatError(f"expected 2 fields, got {len(row)}", path, lineno)
        try:
            epoch = int(row[0])
            value = float(row[1])
        except ValueError:
            raise FormatError(f"cannot parse row {','.join(row)!r}", path, lineno) from None
        if not np.isfinite(value):
            raise FormatError(f"non-finite coverage {row[1]!r}", path, lineno)
        rows.append((epoch, value, lineno))
    if not header_seen:
        raise FormatError("empty series file", path)
    if not rows:
        raise FormatError("series file has no data rows", path)
    rows.sort(key=lambda r: r[0])
    for (e1, _, _), (e2, _, line2) in zip(rows, rows[1:]):
        if e1 == e2:
            raise FormatError(f"duplicate epoch {e2}", path, line2)
    return CoverageSeries(
        np.array([r[0] for r in rows], dtype=np.int64),
        np.array([r[1] for r in rows], dtype=np.float64),
    )


def read_series_csv(path) -> CoverageSeries:
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read ({exc.strerror})", path) from None
    return parse_series_csv(text, path)
