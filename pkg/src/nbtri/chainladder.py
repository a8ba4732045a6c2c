"""Deterministic chain-ladder baseline with volume-weighted development factors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .triangle import Triangle, to_cumulative


class ChainLadderError(ValueError):
    pass


def round_half_away(a):
    a = np.asarray(a, dtype=float)
    return (np.sign(a) * np.floor(np.abs(a) + 0.5)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ChainLadderResult:
    factors: np.ndarray
    completed: np.ndarray
    observed: np.ndarray

    @property
    def rounded(self) -> np.ndarray:
        """Integer view; observed cells are returned unchanged."""
        return np.where(self.observed, self.completed, round_half_away(self.completed)).astype(np.int64)

    @property
    def reserves(self) -> np.ndarray:
        return np.where(self.observed, 0.0, self.completed).sum(axis=1)

    @property
    def total(self) -> float:
        return float(self.reserves.sum())


def chain_ladder(x: Triangle) -> ChainLadderResult:
    n = x.n
    c = to_cumulative(x).values.astype(float)
    factors = np.empty(max(n - 1, 0))
    for j in range(n - 1):
        rows = n - j - 1
        den = c[:rows, j].sum()
        if den <= 0:
            raise ChainLadderError(f"zero cumulative sum in development year {j + 1}")
        factors[j] = c[:rows, j + 1].sum() / den
    full = c.copy()
    for i in range(1, n):
        for j in range(n - i, n):
            full[i, j] = full[i, j - 1] * factors[j - 1]
    inc = np.diff(full, axis=1, prepend=0.0)
    inc = np.where(x.mask, x.values, inc)
    return ChainLadderResult(factors, inc, x.mask)


def reserves_from_completed(r: ChainLadderResult):
    """Per-origin reserves (unrounded) and their total."""
    res = r.reserves
    return res, float(res.sum())
