"""Statistical tests for the evaluation reports.

Pearson's chi-square test of independence on a contingency table (upper-tail
p via the regularized incomplete gamma function) and the classical paired
t-test (two-tailed p via the regularized incomplete beta function). P-values
come from special-function evaluation, so any degrees of freedom work.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from scipy import special


class ZeroVarianceError(ValueError):
    """All paired differences are equal and nonzero; t is undefined."""


@dataclass(frozen=True)
class StatResult:
    statistic: float
    df: float
    p_value: float

    def __post_init__(self):
        if not 0 <= self.p_value <= 1:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of observations by (row label, column label)."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.row_labels) < 2 or len(self.col_labels) < 2:
            raise ValueError("a contingency table needs at least 2 rows and 2 columns")
        if len(self.counts) != len(self.row_labels):
            raise ValueError("row count mismatch")
        for row in self.counts:
            if len(row) != len(self.col_labels):
                raise ValueError("column count mismatch")
            if any(value < 0 for value in row):
                raise ValueError("counts must be non-negative")

    @classmethod
    def from_rows(cls, rows: dict[str, Sequence[int]], col_labels: Sequence[str]):
        return cls(
            row_labels=tuple(rows),
            col_labels=tuple(col_labels),
            counts=tuple(tuple(int(v) for v in row) for row in rows.values()),
        )

    @classmethod
    def from_csv(cls, path: str | Path) -> "ContingencyTable":
        """Read a table whose header names the column levels and whose first
        column labels each row."""
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or len(header) < 3:
                raise ValueError(f"{path}: expected a header with at least two level columns")
            col_labels = tuple(label.strip() for label in header[1:])
            row_labels = []
            counts = []
            for row in reader:
                if not row or not any(cell.strip() for cell in row):
                    continue
                row_labels.append(row[0].strip())
                counts.append(tuple(int(cell) for cell in row[1 : len(col_labels) + 1]))
        return cls(row_labels=tuple(row_labels), col_labels=col_labels, counts=tuple(counts))

    def row_totals(self) -> list[int]:
        return [sum(row) for row in self.counts]

    def col_totals(self) -> list[int]:
        return [sum(row[j] for row in self.counts) for j in range(len(self.col_labels))]

    def grand_total(self) -> int:
        return sum(self.row_totals())


def chi2_sf(statistic: float, df: float) -> float:
    """Upper tail of the chi-square distribution."""
    if statistic < 0 or df <= 0:
        raise ValueError("statistic must be >= 0 and df > 0")
    return float(special.gammaincc(df / 2.0, statistic / 2.0))


def t_sf_two_tailed(statistic: float, df: float) -> float:
    """Two-tailed tail probability of Student's t distribution."""
    if df <= 0:
        raise ValueError("df must be positive")
    if statistic == 0:
        return 1.0
    x = df / (df + statistic * statistic)
    return float(special.betainc(df / 2.0, 0.5, x))


def chi_square(table: ContingencyTable) -> StatResult:
    """Pearson chi-square test of independence.

    Expected counts are row_total * col_total / grand_total; a zero row or
    column total makes the test undefined and raises.
    """
    row_totals = table.row_totals()
    col_totals = table.col_totals()
    grand = table.grand_total()
    if any(total == 0 for total in row_totals) or any(total == 0 for total in col_totals):
        raise ValueError("chi-square is undefined for a zero row or column total")
    statistic = 0.0
    for i, row in enumerate(table.counts):
        for j, observed in enumerate(row):
            expected = row_totals[i] * col_totals[j] / grand
            statistic += (observed - expected) ** 2 / expected
    df = (len(table.row_labels) - 1) * (len(table.col_labels) - 1)
    return StatResult(statistic=statistic, df=df, p_value=chi2_sf(statistic, df))


def paired_t(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Classical paired t-test on the differences a - b (two-tailed).

    Identical lists give t = 0, p = 1; equal but nonzero differences have no
    defined t and raise ZeroVarianceError.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two pairs")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    mean = sum(diffs) / n
    variance = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    df = n - 1
    if variance == 0.0:
        if mean == 0.0:
            return StatResult(statistic=0.0, df=df, p_value=1.0)
        raise ZeroVarianceError("all differences are equal and nonzero")
    statistic = mean / math.sqrt(variance / n)
    return StatResult(statistic=statistic, df=df, p_value=t_sf_two_tailed(statistic, df))
