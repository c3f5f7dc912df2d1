"""Ingestion of returns tables and labeled tables from delimited text."""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigError, DataError

ColumnSpec = Union[int, str]


@dataclass(frozen=True)
class ReturnsTable:
    """Dated asset returns in decimal units; dates are opaque strings."""

    dates: List[str]
    assets: List[str]
    returns: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def window(self, start: str, length: int) -> "ReturnsTable":
        """``length`` consecutive rows beginning at the row dated ``start``.

        Raises:
            ConfigError: unknown start date or window past the end of the data.
        """
        start = str(start)
        if start not in self.dates:
            raise ConfigError(f"window start {start!r} not found in returns dates")
        i = self.dates.index(start)
        if length < 1 or i + length > len(self.dates):
            raise ConfigError(
                f"window of {length} rows from {start!r} exceeds the data "
                f"({len(self.dates) - i} rows available)"
            )
        return ReturnsTable(self.dates[i:i + length], list(self.assets), self.returns[i:i + length].copy())


@dataclass(frozen=True)
class LabeledTable:
    """Binary labels in {-1, +1} with a covariate matrix."""

    labels: np.ndarray
    covariates: np.ndarray
    covariate_names: List[str]
    label_name: str

    @property
    def n(self) -> int:
        return self.labels.size

    def rows(self) -> np.ndarray:
        """Samples as ``(label, z_1, ..., z_p)`` rows."""
        return np.column_stack([self.labels, self.covariates])

    def split_halves(self):
        """First ``ceil(n/2)`` rows and the remaining rows."""
        h = (self.n + 1) // 2
        first = LabeledTable(self.labels[:h], self.covariates[:h], self.covariate_names, self.label_name)
        second = LabeledTable(self.labels[h:], self.covariates[h:], self.covariate_names, self.label_name)
        return first, second


def _read_rows(path, delimiter):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    with open(path, newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        if delimiter is None:
            try:
                delimiter = csv.Sniffer().sniff(sample, delimiters=",;\t").delimiter
            except csv.Error:
                delimiter = ","
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    seen = set()
    for j, name in enumerate(header, start=1):
        if name == "":
            raise DataError(f"{path}: header column {j} is blank")
        if name in seen:
            raise DataError(f"{path}: duplicate header {name!r} (column {j})")
        seen.add(name)
    body = rows[1:]
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}")
    return path, header, body


def _resolve_columns(path, names: Sequence[str], spec: Optional[Sequence[ColumnSpec]]):
    """Positions (into ``names``) for a subset given as 1-based indices or names."""
    if spec is None:
        return list(range(len(names)))
    out = []
    for item in spec:
        if isinstance(item, (int, np.integer)) or (isinstance(item, str) and item.strip().isdigit()):
            k = int(item)
            if not 1 <= k <= len(names):
                raise DataError(f"{path}: column number {k} out of range 1..{len(names)}")
            out.append(k - 1)
        else:
            if item not in names:
                raise DataError(f"{path}: missing column {item!r}")
            out.append(names.index(item))
    return out


def _numeric(path, body, col_positions, header):
    values = np.empty((len(body), len(col_positions)))
    for i, row in enumerate(body):
        for j, pos in enumerate(col_positions):
            cell = row[pos].strip()
            where = f"{path}: row {i + 2}, column {header[pos]!r}"
            if cell == "":
                raise DataError(f"{where}: empty cell")
            try:
                val = float(cell)
            except ValueError:
                raise DataError(f"{where}: non-numeric value {cell!r}") from None
            if not np.isfinite(val):
                raise DataError(f"{where}: non-finite value {cell!r}")
            values[i, j] = val
    return values


def _map_labels(path, raw, label_name, positive_label):
    classes = sorted(set(raw))
    if positive_label is not None:
        positive = str(positive_label)
        if positive not in classes:
            raise DataError(f"{path}: positive label {positive!r} not present in column {label_name!r}")
        if len(classes) > 2:
            raise DataError(f"{path}: column {label_name!r} has {len(classes)} classes, expected 2")
        return np.where(np.array(raw) == positive, 1.0, -1.0)
    if len(classes) != 2:
        raise DataError(f"{path}: column {label_name!r} has {len(classes)} classes, expected 2")
    try:
        numeric = sorted(float(c) for c in classes)
    except ValueError:
        numeric = None
    if numeric is not None:
        lo, hi = numeric
        return np.where(np.array([float(c) for c in raw]) == hi, 1.0, -1.0)
    return np.where(np.array(raw) == classes[1], 1.0, -1.0)


def ingest_csv(path, schema: str, *, columns: Optional[Sequence[ColumnSpec]] = None,
               percent_to_decimal: bool = False, label_column: Optional[ColumnSpec] = None,
               positive_label=None, delimiter: Optional[str] = None):
    """Read a delimited file with a header row into a typed table.

    Args:
        path: file path.
        schema: ``"returns"`` (first column is a date, the rest are asset
            returns) or ``"labeled"`` (one label column, the rest covariates).
        columns: optional subset of asset/covariate columns, given as names
            or 1-based positions counted among the asset/covariate columns.
        percent_to_decimal: divide returns by 100.
        label_column: label column name or 1-based position in the file
            (default: first column).
        positive_label: label value mapped to +1. By default the larger of
            two numeric labels, or the later of two sorted string labels.

    Raises:
        DataError: missing column, blank or non-numeric cell, duplicate
            header, or a label column that is not binary.
    """
    path, header, body = _read_rows(path, delimiter)
    if not body:
        raise DataError(f"{path}: no data rows")
    if schema == "returns":
        dates = [row[0].strip() for row in body]
        for i, d in enumerate(dates):
            if d == "":
                raise DataError(f"{path}: row {i + 2}, column {header[0]!r}: empty cell")
        asset_names = header[1:]
        picks = _resolve_columns(path, asset_names, columns)
        positions = [p + 1 for p in picks]
        values = _numeric(path, body, positions, header)
        if percent_to_decimal:
            values = values / 100.0
        return ReturnsTable(dates, [header[p] for p in positions], values)

    if schema == "labeled":
        if label_column is None:
            label_pos = 0
        else:
            label_pos = _resolve_columns(path, header, [label_column])[0]
        others = [j for j in range(len(header)) if j != label_pos]
        names = [header[j] for j in others]
        picks = _resolve_columns(path, names, columns)
        positions = [others[p] for p in picks]
        raw = []
        for i, row in enumerate(body):
            cell = row[label_pos].strip()
            if cell == "":
                raise DataError(f"{path}: row {i + 2}, column {header[label_pos]!r}: empty cell")
            raw.append(cell)
        labels = _map_labels(path, raw, header[label_pos], positive_label)
        values = _numeric(path, body, positions, header)
        return LabeledTable(labels, values, [header[p] for p in positions], header[label_pos])

    raise ValueError(f"unknown schema {schema!r}; expected 'returns' or 'labeled'")
