"""Result tables and their CSV layout.

``results.csv`` columns::

    experiment, cell, algorithm, variant, n, num_leaves, seed, metric, value, flag

``summary.csv`` columns::

    experiment, cell, algorithm, variant, n, num_leaves, metric,
    count, mean, sd, median, note

``sd`` is the sample standard deviation across seeds (0 for a single seed).
Floats are written with ``repr`` so re-runs are byte-identical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, field, fields
from typing import Dict, List, Optional

import numpy as np

from catekit.errors import DataError


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    cell: str
    algorithm: str
    variant: str
    n: Optional[int]
    num_leaves: Optional[int]
    seed: int
    metric: str
    value: float
    flag: str = ""


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    cell: str
    algorithm: str
    variant: str
    n: Optional[int]
    num_leaves: Optional[int]
    metric: str
    count: int
    mean: float
    sd: float
    median: float
    note: str = ""


RESULT_COLUMNS = [f.name for f in fields(ResultRow)]
SUMMARY_COLUMNS = [f.name for f in fields(SummaryRow)]

_GROUP_KEYS = ("experiment", "cell", "algorithm", "variant", "n", "num_leaves", "metric")


@dataclass
class ResultTable:
    rows: List[ResultRow] = field(default_factory=list)
    extra_summary: List[SummaryRow] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)

    def add(self, row: ResultRow):
        self.rows.append(row)

    def extend(self, rows):
        self.rows.extend(rows)

    def check_unique(self):
        seen = set()
        for r in self.rows:
            key = (r.experiment, r.cell, r.algorithm, r.variant, r.seed, r.metric)
            if key in seen:
                raise DataError(f"duplicate result row for {key}")
            seen.add(key)

    def select(self, **criteria) -> List[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in criteria.items())]

    def aggregates(self) -> List[SummaryRow]:
        groups: Dict[tuple, List[float]] = {}
        for r in self.rows:
            key = tuple(getattr(r, k) for k in _GROUP_KEYS)
            groups.setdefault(key, []).append(r.value)
        out = []
        for key, vals in groups.items():
            a = np.asarray(vals, dtype=np.float64)
            finite = a[np.isfinite(a)]
            if finite.size:
                mean = float(np.mean(finite))
                sd = float(np.std(finite, ddof=1)) if finite.size > 1 else 0.0
                med = float(np.median(finite))
            else:
                mean = sd = med = float("nan")
            note = "" if finite.size == a.size else f"{a.size - finite.size} non-finite values dropped"
            k = dict(zip(_GROUP_KEYS, key))
            out.append(SummaryRow(**k, count=int(finite.size), mean=mean, sd=sd, median=med, note=note))
        return out

    def summary(self) -> List[SummaryRow]:
        return self.aggregates() + list(self.extra_summary)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_rows(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for r in rows:
            out.writerow([_fmt(v) for v in astuple(r)])


def read_csv_dicts(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
