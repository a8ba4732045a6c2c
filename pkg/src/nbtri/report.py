"""Posterior summaries of fitted chains, as plain rows ready for CSV."""
from __future__ import annotations

import numpy as np

from .predict import QUANTILES
from .sampler import BLOCKS, ChainRun


def _row(name, d):
    qs = np.quantile(d, QUANTILES)
    return {"parameter": name, "mean": float(np.mean(d)), "q025": qs[0], "q50": qs[1], "q975": qs[2]}


def parameter_summary(run: ChainRun) -> list[dict]:
    n = run.n
    rows = [_row(f"alpha_{i + 1}", run.alpha[:, i]) for i in range(n)]
    rows += [_row(f"pi_{j + 1}", run.pi[:, j]) for j in range(n)]
    rows += [_row(f"gamma_{j + 1}", run.gamma[:, j]) for j in range(n)]
    return rows


def correlation_draws(run: ChainRun, k: int = 1) -> np.ndarray:
    """``(T, n-k)`` draws of Corr(X[i,j], X[i,j+k]) for j = 1..n-k; zero when k > q."""
    n, q = run.n, run.q
    pi, g = run.pi, run.gamma
    out = np.zeros((len(run), max(n - k, 0)))
    if k > q:
        return out
    for j in range(n - k):
        num = np.zeros(len(run))
        for l in range(q - k + 1):
            if j - l >= 0:
                num += pi[:, j - l] * g[:, j - l]
        den = np.sqrt(pi[:, j] * (1 + pi[:, j]) * pi[:, j + k] * (1 + pi[:, j + k]))
        out[:, j] = num / den
    return out


def correlation_summary(run: ChainRun) -> list[dict]:
    """rho_{j,j+k} summaries for every lag k <= q (none when q = 0)."""
    rows = []
    for k in range(1, min(run.q, run.n - 1) + 1):
        d = correlation_draws(run, k)
        rows += [_row(f"rho_{j + 1}_{j + 1 + k}", d[:, j]) for j in range(d.shape[1])]
    return rows


def acceptance_rows(run: ChainRun) -> list[dict]:
    return [{"block": b, "acceptance": run.acceptance.get(b, float("nan"))} for b in BLOCKS]
