"""Sparse nonnegative HDI matrices: ingestion, dual index views and fold plans."""

from __future__ import annotations

import hashlib
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

FOLD_COUNT = 10
_SPLIT = re.compile(r"[\s,]+")


class DataError(ValueError):
    """Raised for malformed, negative or duplicated input triples."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class SparseDataset:
    """Observed entries of a nonnegative matrix with row- and column-major views.

    ``rows``, ``cols`` and ``vals`` hold the entries in entry order. The
    row view is a CSR layout: entries of dense row ``m`` occupy
    ``row_ptr[m]:row_ptr[m+1]`` of ``row_perm`` (entry indices, columns
    strictly increasing). The column view mirrors it with ``col_ptr`` and
    ``col_perm``. ``row_ids`` / ``col_ids`` map dense index to external id.
    """

    num_rows: int
    num_cols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    row_ids: np.ndarray
    col_ids: np.ndarray
    row_ptr: np.ndarray = field(init=False, repr=False)
    row_perm: np.ndarray = field(init=False, repr=False)
    col_ptr: np.ndarray = field(init=False, repr=False)
    col_perm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        vals = np.ascontiguousarray(self.vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise DataError("rows, cols and vals must be 1-d arrays of equal length")
        if len(self.row_ids) != self.num_rows or len(self.col_ids) != self.num_cols:
            raise DataError("id maps do not match the matrix dimensions")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.num_rows:
                raise DataError("row index out of range")
            if cols.min() < 0 or cols.max() >= self.num_cols:
                raise DataError("column index out of range")
            if not np.all(np.isfinite(vals)) or vals.min() < 0:
                raise DataError("values must be finite and nonnegative")
        row_perm = np.lexsort((cols, rows))
        col_perm = np.lexsort((rows, cols))
        if rows.size > 1:
            r, c = rows[row_perm], cols[row_perm]
            dup = (r[1:] == r[:-1]) & (c[1:] == c[:-1])
            if dup.any():
                k = int(np.argmax(dup))
                raise DataError(f"duplicate entry ({r[k]}, {c[k]})")
        for name, arr in (("rows", rows), ("cols", cols), ("vals", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        set_ = object.__setattr__
        set_(self, "row_ids", np.asarray(self.row_ids, dtype=np.int64))
        set_(self, "col_ids", np.asarray(self.col_ids, dtype=np.int64))
        set_(self, "row_perm", row_perm)
        set_(self, "col_perm", col_perm)
        set_(self, "row_ptr", _ptr(rows, self.num_rows))
        set_(self, "col_ptr", _ptr(cols, self.num_cols))

    def __len__(self) -> int:
        return int(self.vals.size)

    @property
    def nnz(self) -> int:
        return len(self)

    def row_entries(self, m: int) -> list[tuple[int, float]]:
        """(column, value) pairs of dense row ``m`` in increasing column order."""
        idx = self.row_perm[self.row_ptr[m] : self.row_ptr[m + 1]]
        return [(int(self.cols[i]), float(self.vals[i])) for i in idx]

    def col_entries(self, n: int) -> list[tuple[int, float]]:
        idx = self.col_perm[self.col_ptr[n] : self.col_ptr[n + 1]]
        return [(int(self.rows[i]), float(self.vals[i])) for i in idx]

    def row_index(self, ext_id: int) -> int:
        return _lookup(self.row_ids, ext_id, "row")

    def col_index(self, ext_id: int) -> int:
        return _lookup(self.col_ids, ext_id, "column")

    def take(self, mask_or_index) -> "SparseDataset":
        """Restrict to a subset of entries, keeping both index spaces."""
        sel = np.asarray(mask_or_index)
        return SparseDataset(
            self.num_rows,
            self.num_cols,
            self.rows[sel],
            self.cols[sel],
            self.vals[sel],
            self.row_ids,
            self.col_ids,
        )

    def transpose(self) -> "SparseDataset":
        return SparseDataset(
            self.num_cols, self.num_rows, self.cols, self.rows, self.vals, self.col_ids, self.row_ids
        )

    def same_as(self, other: "SparseDataset") -> bool:
        return (
            self.num_rows == other.num_rows
            and self.num_cols == other.num_cols
            and np.array_equal(self.row_ids, other.row_ids)
            and np.array_equal(self.col_ids, other.col_ids)
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.vals, other.vals)
        )


def _ptr(index: np.ndarray, size: int) -> np.ndarray:
    ptr = np.zeros(size + 1, dtype=np.int64)
    np.cumsum(np.bincount(index, minlength=size), out=ptr[1:])
    return ptr


def _lookup(ids: np.ndarray, ext_id: int, what: str) -> int:
    pos = int(np.searchsorted(ids, ext_id))
    if pos >= ids.size or ids[pos] != ext_id:
        raise KeyError(f"unknown {what} id {ext_id}")
    return pos


def from_triples(triples: Iterable[tuple[int, int, float]]) -> SparseDataset:
    """Build a dataset from ``(row_id, col_id, value)`` triples with external ids."""
    triples = list(triples)
    if not triples:
        return _empty()
    ext_r = np.array([t[0] for t in triples], dtype=np.int64)
    ext_c = np.array([t[1] for t in triples], dtype=np.int64)
    vals = np.array([t[2] for t in triples], dtype=np.float64)
    row_ids, rows = np.unique(ext_r, return_inverse=True)
    col_ids, cols = np.unique(ext_c, return_inverse=True)
    return SparseDataset(len(row_ids), len(col_ids), rows, cols, vals, row_ids, col_ids)


def _empty() -> SparseDataset:
    z = np.zeros(0, dtype=np.int64)
    return SparseDataset(0, 0, z, z, np.zeros(0), z, z)


def load_triples(source: TextIO | str) -> SparseDataset:
    """Parse ``row col value`` lines (whitespace, comma or tab separated).

    Blank lines and lines starting with ``#`` are skipped. External ids are
    integers; dense indices follow the sorted order of external ids.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return load_triples(fh)
    triples = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        if len(parts) != 3:
            raise DataError(f"expected 3 fields, got {len(parts)}", lineno)
        try:
            r, c = int(parts[0]), int(parts[1])
            v = float(parts[2])
        except ValueError:
            raise DataError(f"cannot parse {line!r}", lineno) from None
        if not math.isfinite(v):
            raise DataError(f"non-finite value {parts[2]}", lineno)
        if v < 0:
            raise DataError(f"negative value {v}", lineno)
        prev = seen.setdefault((r, c), lineno)
        if prev != lineno:
            raise DataError(f"duplicate entry ({r}, {c}), first seen on line {prev}", lineno)
        triples.append((r, c, v))
    return from_triples(triples)


def loads_triples(text: str) -> SparseDataset:
    return load_triples(io.StringIO(text))


def dump_triples(ds: SparseDataset, out: TextIO) -> None:
    """Write entries in entry order with external ids; values in round-trip precision."""
    for r, c, v in zip(ds.row_ids[ds.rows], ds.col_ids[ds.cols], ds.vals):
        out.write(f"{r} {c} {float(v)!r}\n")


def dumps_triples(ds: SparseDataset) -> str:
    buf = io.StringIO()
    dump_triples(ds, buf)
    return buf.getvalue()


def density(ds_or_counts) -> float:
    """Observed fraction |Λ| / (|M|·|N|).

    Accepts a dataset or an ``(nnz, num_rows, num_cols)`` tuple so
    published dataset statistics can be checked without the data.
    """
    if isinstance(ds_or_counts, SparseDataset):
        nnz, m, n = ds_or_counts.nnz, ds_or_counts.num_rows, ds_or_counts.num_cols
    else:
        nnz, m, n = ds_or_counts
    if m <= 0 or n <= 0:
        raise DataError("density undefined for a matrix with a zero dimension")
    return nnz / (m * n)


# --------------------------------------------------------------------------- folds

ROLES = ("train", "validation", "test")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    assignment: np.ndarray
    seed: int
    repetition: int = 0
    fold_count: int = FOLD_COUNT

    @property
    def validation_fold(self) -> int:
        return (7 + self.repetition) % self.fold_count

    @property
    def test_folds(self) -> tuple[int, int]:
        return ((8 + self.repetition) % self.fold_count, (9 + self.repetition) % self.fold_count)

    @property
    def train_folds(self) -> tuple[int, ...]:
        held = {self.validation_fold, *self.test_folds}
        return tuple(f for f in range(self.fold_count) if f not in held)

    def folds_for(self, role: str) -> tuple[int, ...]:
        if role == "train":
            return self.train_folds
        if role == "validation":
            return (self.validation_fold,)
        if role == "test":
            return self.test_folds
        raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.fold_count)

    def digest(self) -> str:
        """Hash of the fold assignment (rotation excluded)."""
        return hashlib.sha256(self.assignment.astype("<i8").tobytes()).hexdigest()[:16]

    def dumps(self) -> str:
        lines = [f"folds={self.fold_count} seed={self.seed}"]
        lines.extend(str(int(a)) for a in self.assignment)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "FoldPlan":
        lines = text.splitlines()
        m = re.fullmatch(r"folds=(\d+) seed=(-?\d+)", lines[0].strip()) if lines else None
        if m is None:
            raise DataError("bad fold plan header", 1)
        folds, seed = int(m.group(1)), int(m.group(2))
        if folds != FOLD_COUNT:
            raise DataError(f"fold count must be {FOLD_COUNT}, got {folds}", 1)
        labels = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                a = int(line)
            except ValueError:
                raise DataError(f"bad fold label {line!r}", lineno) from None
            if not 0 <= a < folds:
                raise DataError(f"fold label {a} out of range", lineno)
            labels.append(a)
        return cls(np.array(labels, dtype=np.int64), seed)


def make_folds(ds: SparseDataset, seed: int) -> FoldPlan:
    """Randomly partition the entries into ten folds whose sizes differ by at most one."""
    if ds.nnz < FOLD_COUNT:
        raise DataError(f"need at least {FOLD_COUNT} entries for tenfold splitting, got {ds.nnz}")
    perm = np.random.default_rng(seed).permutation(ds.nnz)
    assignment = np.empty(ds.nnz, dtype=np.int64)
    assignment[perm] = np.arange(ds.nnz) % FOLD_COUNT
    assignment.setflags(write=False)
    return FoldPlan(assignment, seed)


def rotate_folds(plan: FoldPlan, repetition: int) -> FoldPlan:
    if not 0 <= repetition < plan.fold_count:
        raise ValueError(f"repetition must be in 0..{plan.fold_count - 1}, got {repetition}")
    return FoldPlan(plan.assignment, plan.seed, repetition, plan.fold_count)


def subset(ds: SparseDataset, plan: FoldPlan, role: str) -> SparseDataset:
    if plan.assignment.size != ds.nnz:
        raise ValueError("fold plan was built for a different dataset")
    return ds.take(np.isin(plan.assignment, plan.folds_for(role)))
