"""Run-off triangles of claim counts.

Indices are 0-based internally; every external surface (CSV files, error
messages, the CLI) uses 1-based origin/development years.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TriangleError(ValueError):
    pass


def staircase_mask(n: int) -> np.ndarray:
    """Boolean n x n mask of the observed upper-left region."""
    i, j = np.indices((n, n))
    return i + j <= n - 1


@dataclass(frozen=True, eq=False)
class Triangle:
    """Incremental claim counts; ``values`` is zero outside the observed staircase."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise TriangleError(f"triangle must be square, got shape {v.shape}")
        if not np.issubdtype(v.dtype, np.integer):
            raise TriangleError("triangle values must be integers")
        mask = staircase_mask(v.shape[0])
        if np.any(v[~mask] != 0):
            raise TriangleError("values present outside the observed region")
        bad = np.argwhere(mask & (v < 0))
        if len(bad):
            i, j = bad[0]
            raise TriangleError(f"negative count at cell ({i + 1},{j + 1})")
        v = v.astype(np.int64, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return staircase_mask(self.n)

    def observed(self, i: int, j: int) -> bool:
        """1-based membership test."""
        return 1 <= i <= self.n and 1 <= j <= self.n - i + 1

    def __getitem__(self, ij):
        i, j = ij
        if not self.observed(i, j):
            raise KeyError(f"cell ({i},{j}) is not observed")
        return int(self.values[i - 1, j - 1])

    def row_lengths(self) -> np.ndarray:
        return self.n - np.arange(self.n)

    def checksum(self) -> str:
        return hashlib.sha256(format_triangle(self).encode()).hexdigest()

    @classmethod
    def from_full(cls, full: np.ndarray) -> "Triangle":
        """Keep only the observed staircase of a complete n x n matrix."""
        full = np.asarray(full)
        return cls(np.where(staircase_mask(full.shape[0]), full, 0).astype(np.int64))


@dataclass(frozen=True, eq=False)
class CumulativeTriangle:
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def to_incremental(self) -> Triangle:
        inc = np.diff(self.values, axis=1, prepend=0)
        return Triangle(np.where(staircase_mask(self.n), inc, 0))


def to_cumulative(t: Triangle) -> CumulativeTriangle:
    c = np.cumsum(t.values, axis=1)
    c = np.where(t.mask, c, 0)
    c.setflags(write=False)
    return CumulativeTriangle(c)


def observed_cells(t: Triangle) -> list[tuple[int, int, int]]:
    """Row-major (i, j, x) over the staircase, 1-based."""
    return [(i + 1, j + 1, int(t.values[i, j])) for i in range(t.n) for j in range(t.n - i)]


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def parse_triangle(text: str) -> Triangle:
    rows = [r for r in csv.reader(io.StringIO(text)) if any(f.strip() for f in r)]
    if rows and rows[0] and not _is_number(rows[0][0].strip()):
        rows = rows[1:]
    if not rows:
        raise TriangleError("empty triangle file")
    n = len(rows)
    values = np.zeros((n, n), dtype=np.int64)
    for i, row in enumerate(rows):
        fields = [f.strip() for f in row]
        if len(fields) != n:
            raise TriangleError(f"row {i + 1} has {len(fields)} fields, expected {n}")
        for j, f in enumerate(fields):
            observed = j <= n - i - 1
            if not f:
                if observed:
                    raise TriangleError(f"blank cell ({i + 1},{j + 1}) inside the observed region")
                continue
            if not observed:
                raise TriangleError(f"value at cell ({i + 1},{j + 1}) in the unobserved region")
            try:
                v = int(f)
            except ValueError:
                raise TriangleError(f"non-integer value {f!r} at cell ({i + 1},{j + 1})") from None
            if v < 0:
                raise TriangleError(f"negative count at cell ({i + 1},{j + 1})")
            values[i, j] = v
    return Triangle(values)


def format_triangle(t: Triangle) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    for i in range(t.n):
        w.writerow([str(t.values[i, j]) if j < t.n - i else "" for j in range(t.n)])
    return out.getvalue()


def format_matrix(m: np.ndarray, fmt: str = "{}") -> str:
    """Wide CSV of a full matrix (no blanks)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    for row in np.asarray(m):
        w.writerow([fmt.format(v) for v in row])
    return out.getvalue()


def read_triangle(path) -> Triangle:
    return parse_triangle(Path(path).read_text())


def write_triangle(path, t: Triangle) -> None:
    Path(path).write_text(format_triangle(t))
