"""Delimited expression-matrix ingestion, validation, and subsampling."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScreenConfig


class MatrixFormatError(ValueError):
    """Raised for malformed input matrices, naming the offending cell."""


@dataclass
class ExpressionMatrix:
    """N x M nonnegative matrix with unique row ids and column ids."""

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (len(self.row_ids), len(self.col_ids)):
            raise MatrixFormatError("matrix shape disagrees with id counts")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise MatrixFormatError("row ids are not unique")
        if np.any(self.values < 0):
            raise MatrixFormatError("matrix contains negative values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _detect_delimiter(first_line: str) -> str:
    return "\t" if first_line.count("\t") >= first_line.count(",") else ","


def load_matrix(path) -> ExpressionMatrix:
    """Load a header + row-id delimited matrix (comma or tab)."""
    path = Path(path)
    with path.open(newline="") as fh:
        head = fh.readline()
        if not head:
            raise MatrixFormatError(f"{path}: empty file")
        delim = _detect_delimiter(head)
        fh.seek(0)
        reader = csv.reader(fh, delimiter=delim)
        header = next(reader)
        col_ids = tuple(c.strip() for c in header[1:])
        row_ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(col_ids) + 1:
                raise MatrixFormatError(
                    f"{path}:{lineno}: expected {len(col_ids) + 1} fields, got {len(rec)}"
                )
            row_ids.append(rec[0].strip())
            vals = []
            for colno, cell in enumerate(rec[1:], start=2):
                try:
                    v = float(cell)
                except ValueError:
                    raise MatrixFormatError(
                        f"{path}:{lineno}: column {colno}: cannot parse {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise MatrixFormatError(
                        f"{path}:{lineno}: column {colno}: non-finite value {cell!r}"
                    )
                if v < 0:
                    raise MatrixFormatError(
                        f"{path}:{lineno}: column {colno}: negative value {cell!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise MatrixFormatError(f"{path}: no data rows")
    if len(set(row_ids)) != len(row_ids):
        dupes = sorted({r for r in row_ids if row_ids.count(r) > 1})
        raise MatrixFormatError(f"{path}: duplicate row ids {dupes[:5]}")
    return ExpressionMatrix(tuple(row_ids), col_ids, np.array(rows))


def save_matrix(m: ExpressionMatrix, path, delimiter: str = ",") -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(("id",) + m.col_ids)
        for rid, row in zip(m.row_ids, m.values):
            writer.writerow([rid] + [repr(float(v)) for v in row])


def subsample(m: ExpressionMatrix, cfg: ScreenConfig):
    """Seed-driven row/column subsample.

    Samples round(fraction * count) rows without replacement, then the
    configured fraction of columns within each regime; selections are
    sorted so fraction 1 reproduces the input ordering.
    Returns (Xc, Xt, row_ids, control_col_ids, test_col_ids).
    """
    rng = np.random.default_rng(cfg.seed)
    n_rows = m.shape[0]
    ctrl = np.array(cfg.control_cols, int) - 1
    test = np.array(cfg.test_cols, int) - 1
    if ctrl.size == 0 or test.size == 0:
        raise ValueError("control and test column lists must be nonempty")
    if ctrl.max() >= m.shape[1] or test.max() >= m.shape[1]:
        raise ValueError("column index out of range")

    n_take = round(cfg.row_fraction * n_rows)
    n_ctl = round(cfg.control_fraction * ctrl.size)
    n_tst = round(cfg.test_fraction * test.size)
    if min(n_take, n_ctl, n_tst) < 1:
        raise ValueError("subsample fractions select an empty set")
    rows = np.sort(rng.choice(n_rows, n_take, replace=False))
    keep_c = np.sort(rng.choice(ctrl, n_ctl, replace=False))
    keep_t = np.sort(rng.choice(test, n_tst, replace=False))

    Xc = m.values[np.ix_(rows, keep_c)]
    Xt = m.values[np.ix_(rows, keep_t)]
    row_ids = tuple(m.row_ids[i] for i in rows)
    return Xc, Xt, row_ids, tuple(m.col_ids[j] for j in keep_c), tuple(m.col_ids[j] for j in keep_t)
