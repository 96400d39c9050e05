"""Reading point sets from CSV and LIBSVM text files."""
import csv
from pathlib import Path

import numpy as np

from .kernel import DataMatrix


class FormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _number(token, path, lineno):
    try:
        return float(token)
    except ValueError:
        raise FormatError(path, lineno, f"not a number: {token!r}") from None


def _label(token, path, lineno):
    value = _number(token, path, lineno)
    if value != int(value):
        raise FormatError(path, lineno, f"label must be an integer, got {token!r}")
    return int(value)


def read_csv(path, label_column=True):
    """One point per row; with ``label_column`` the last field is an integer class id."""
    rows, labels = [], []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if label_column:
                if len(fields) < 2:
                    raise FormatError(path, lineno, "need at least one feature and a label")
                labels.append(_label(fields[-1], path, lineno))
                fields = fields[:-1]
            values = [_number(f, path, lineno) for f in fields]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise FormatError(path, lineno, f"expected {width} features, got {len(values)}")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data")
    return DataMatrix(np.array(rows), np.array(labels) if label_column else None)


def read_libsvm(path):
    """``label idx:val ...`` lines with 1-based indices, densified to ``max index`` columns."""
    entries, labels = [], []
    dim = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_label(tokens[0], path, lineno))
            row = {}
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep or not idx.isdigit() or int(idx) < 1:
                    raise FormatError(path, lineno, f"malformed feature {tok!r}")
                row[int(idx) - 1] = _number(val, path, lineno)
            if row:
                dim = max(dim, max(row) + 1)
            entries.append(row)
    if not entries:
        raise ValueError(f"{path}: no data")
    if dim == 0:
        raise ValueError(f"{path}: no features")
    points = np.zeros((len(entries), dim))
    for i, row in enumerate(entries):
        for j, v in row.items():
            points[i, j] = v
    return DataMatrix(points, np.array(labels))


def ingest(path, fmt=None, label_column=True):
    """Load ``path``; the format is taken from the extension when not given."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "libsvm"
    if fmt == "csv":
        return read_csv(path, label_column=label_column)
    if fmt == "libsvm":
        return read_libsvm(path)
    raise ValueError(f"unknown format {fmt!r}")
