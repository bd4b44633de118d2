"""Reader-study tables: long-form ratings ingest, grade tokens, and consensus."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InputError

METHODS = ("LR", "SR", "HR")

LIKERT_ITEMS = (
    "image_quality",
    "noise",
    "motion_artifacts",
    "gibbs_artifacts",
    "cartilage",
    "meniscus",
    "cruciate_ligament",
    "collateral_ligament",
    "tibial_nerve",
)

GRADE_TOKENS = ("0", "1", "2A", "2B", "3")
_GRADE_RANK = {tok: i for i, tok in enumerate(GRADE_TOKENS)}

RATINGS_HEADER = ("case_id", "side", "reader_id", "method", "item", "value")
DIAGNOSTIC_HEADER = ("case_id", "compartment", "ref_grade", "lr_grade", "sr_grade", "hr_grade")


def grade_rank(token: str) -> int:
    """Position of a grade token in the canonical order 0 < 1 < 2A < 2B < 3."""
    try:
        return _GRADE_RANK[token]
    except KeyError:
        raise InputError(f"unknown grade token {token!r}; expected one of {GRADE_TOKENS}") from None


def consensus(values):
    """Majority value among exactly three readings; ordinal median as fallback.

    Works for binary, Likert, and grade-token readings. When all three
    readers disagree, the middle value in the item's canonical order wins.
    """
    values = list(values)
    if len(values) != 3:
        raise InputError(f"consensus requires exactly 3 readings, got {len(values)}")
    counts = Counter(values)
    value, freq = counts.most_common(1)[0]
    if freq >= 2:
        return value
    if all(v in _GRADE_RANK for v in values):
        return sorted(values, key=grade_rank)[1]
    try:
        return sorted(values, key=float)[1]
    except (TypeError, ValueError):
        raise InputError(f"cannot order readings {values!r} for a median fallback") from None


@dataclass
class RatingRow:
    case_id: str
    side: str
    reader_id: str
    method: str
    item: str
    value: str


class RatingsTable:
    """Long-form reader scores keyed by (case, reader, method, item).

    `case key` means (case_id, side): the same subject can contribute both
    knees. Values stay as strings; `value_kind` classifies an item as
    likert, binary, or grade data from its observed values.
    """

    def __init__(self, rows):
        self.rows = list(rows)
        if not self.rows:
            raise InputError("ratings table is empty")
        seen = {}
        duplicates = []
        for i, r in enumerate(self.rows):
            if r.method not in METHODS:
                raise InputError(f"row {i}: unknown method {r.method!r}; expected one of {METHODS}")
            key = (r.case_id, r.side, r.reader_id, r.method, r.item)
            if key in seen:
                duplicates.append((seen[key], i, key))
            seen[key] = i
        if duplicates:
            listing = "; ".join(f"rows {a} and {b}: {k}" for a, b, k in duplicates[:5])
            raise InputError(f"duplicate (case, reader, method, item) entries: {listing}")

    @classmethod
    def load(cls, path, delimiter: str | None = None) -> "RatingsTable":
        rows = []
        bad = []
        for i, rec in enumerate(_read_delimited(path, RATINGS_HEADER, delimiter)):
            if any(not rec[c].strip() for c in RATINGS_HEADER):
                bad.append(i + 2)  # 1-based with header line
                continue
            rows.append(RatingRow(*(rec[c].strip() for c in RATINGS_HEADER)))
        if bad:
            raise InputError(f"{path}: rows with missing fields at lines {bad[:10]}")
        return cls(rows)

    def items(self):
        out = []
        for r in self.rows:
            if r.item not in out:
                out.append(r.item)
        return out

    def cases(self):
        out = []
        for r in self.rows:
            key = (r.case_id, r.side)
            if key not in out:
                out.append(key)
        return out

    def readers(self):
        return sorted({r.reader_id for r in self.rows})

    def value_kind(self, item: str) -> str:
        values = {r.value for r in self.rows if r.item == item}
        if not values:
            raise InputError(f"no rows for item {item!r}")
        if values <= {"0", "1"}:
            return "binary"
        if values <= set(GRADE_TOKENS):
            return "grade"
        try:
            nums = {float(v) for v in values}
        except ValueError:
            raise InputError(f"item {item!r} has non-ordinal values {sorted(values)}") from None
        if not all(1 <= v <= 5 for v in nums):
            raise InputError(f"item {item!r} has values outside the 1..5 scale: {sorted(nums)}")
        return "likert"

    def _index(self):
        idx = {}
        for r in self.rows:
            idx[(r.case_id, r.side, r.reader_id, r.method, r.item)] = r.value
        return idx

    def rating_matrix(self, item: str, methods=METHODS):
        """(case x method) units as subjects, readers as raters: for agreement.

        Returns (matrix, categories) where matrix is a list of per-subject
        reader-value lists and categories follow the item's canonical order.
        """
        idx = self._index()
        readers = self.readers()
        kind = self.value_kind(item)
        matrix = []
        for case_id, side in self.cases():
            for method in methods:
                row = [idx.get((case_id, side, reader, method, item)) for reader in readers]
                if all(v is None for v in row):
                    continue
                matrix.append(row)
        categories = self._categories(item, kind)
        return matrix, categories

    def _categories(self, item, kind):
        if kind == "grade":
            return list(GRADE_TOKENS)
        if kind == "binary":
            return ["0", "1"]
        return [str(v) for v in (1, 2, 3, 4, 5)]

    def reader_mean_scores(self, item: str):
        """Reader-averaged numeric scores: (cases x methods array, method names).

        Requires every method present for each (case, reader); grade tokens
        average on their canonical ranks.
        """
        idx = self._index()
        readers = self.readers()
        kind = self.value_kind(item)
        to_num = grade_rank if kind == "grade" else float
        rows = []
        for case_id, side in self.cases():
            per_method = []
            for method in METHODS:
                vals = []
                for reader in readers:
                    v = idx.get((case_id, side, reader, method, item))
                    if v is None:
                        raise InputError(
                            f"item {item!r}: missing {method} rating for case ({case_id}, {side}), "
                            f"reader {reader}; paired tests need all methods present"
                        )
                    vals.append(to_num(v))
                per_method.append(float(np.mean(vals)))
            rows.append(per_method)
        return np.asarray(rows), list(METHODS)

    def consensus_values(self, item: str, method: str):
        """Per-case consensus of the three readers for one method."""
        idx = self._index()
        readers = self.readers()
        if len(readers) != 3:
            raise InputError(f"consensus needs exactly 3 readers, table has {len(readers)}")
        out = []
        for case_id, side in self.cases():
            vals = [idx.get((case_id, side, reader, method, item)) for reader in readers]
            if any(v is None for v in vals):
                raise InputError(
                    f"item {item!r}: incomplete {method} readings for case ({case_id}, {side})"
                )
            out.append(consensus(vals))
        return out


@dataclass
class DiagnosticRow:
    case_id: str
    compartment: str
    ref_grade: str
    lr_grade: str
    sr_grade: str
    hr_grade: str


class DiagnosticTable:
    """Per-compartment reference and per-method grade tokens."""

    def __init__(self, rows):
        self.rows = list(rows)
        if not self.rows:
            raise InputError("diagnostic table is empty")
        for i, r in enumerate(self.rows):
            for grade in (r.lr_grade, r.sr_grade, r.hr_grade):
                if grade not in GRADE_TOKENS:
                    raise InputError(f"row {i}: unknown grade token {grade!r}")
            if r.ref_grade and r.ref_grade not in GRADE_TOKENS:
                raise InputError(f"row {i}: unknown reference grade {r.ref_grade!r}")

    @classmethod
    def load(cls, path, delimiter: str | None = None) -> "DiagnosticTable":
        rows = [
            DiagnosticRow(*(rec[c].strip() for c in DIAGNOSTIC_HEADER))
            for rec in _read_delimited(path, DIAGNOSTIC_HEADER, delimiter)
        ]
        return cls(rows)

    def method_grades(self, method: str):
        attr = {"LR": "lr_grade", "SR": "sr_grade", "HR": "hr_grade"}.get(method)
        if attr is None:
            raise InputError(f"unknown method {method!r}")
        return [getattr(r, attr) for r in self.rows]

    def reference_grades(self):
        return [r.ref_grade if r.ref_grade else None for r in self.rows]


def _read_delimited(path, header, delimiter=None):
    path = Path(path)
    if not path.exists():
        raise InputError(f"table file not found: {path}")
    text = path.read_text()
    if delimiter is None:
        first = text.splitlines()[0] if text.splitlines() else ""
        delimiter = "\t" if "\t" in first else ","
    reader = csv.DictReader(text.splitlines(), delimiter=delimiter)
    got = tuple(name.strip() for name in (reader.fieldnames or ()))
    if got != tuple(header):
        raise InputError(f"{path}: expected header {header}, got {got}")
    records = list(reader)
    offenders = [i + 2 for i, rec in enumerate(records) if None in rec.values() or None in rec]
    if offenders:
        raise InputError(f"{path}: malformed rows at lines {offenders[:10]}")
    return records
