"""Posterior predictive reserves and fit statistics (LPML, BIAS, PVAR)."""
from __future__ import annotations

import csv
import io
import logging
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from .distributions import RngStream
from .model import MAX_REDRAWS, SimulationError
from .sampler import ChainConfig, ChainRun, run_chain
from .triangle import Triangle

log = logging.getLogger(__name__)

QUANTILES = (0.025, 0.5, 0.975)


@dataclass(eq=False)
class ReserveSummary:
    """Predictive draws; ``cells`` is ``(T, n, n)`` with observed cells equal to the data."""

    cells: np.ndarray
    observed: np.ndarray
    clamped: int = 0

    @property
    def n(self) -> int:
        return self.cells.shape[1]

    @property
    def reserves(self) -> np.ndarray:
        """``(T, n)`` per-origin reserves; column 0 (first origin year) is always zero."""
        return np.where(self.observed, 0, self.cells).sum(axis=2)

    @property
    def total(self) -> np.ndarray:
        return self.reserves.sum(axis=1)

    def cell_summary(self) -> list[dict]:
        rows = []
        for i in range(self.n):
            for j in range(self.n):
                d = self.cells[:, i, j]
                qs = np.quantile(d, QUANTILES)
                rows.append({
                    "i": i + 1, "j": j + 1, "observed": int(self.observed[i, j]),
                    "mean": d.mean(), "q025": qs[0], "q50": qs[1], "q975": qs[2],
                })
        return rows

    def reserve_summary(self) -> list[dict]:
        rows = []
        res = self.reserves
        for i in range(1, self.n):
            rows.append(_summ(f"N_{i + 1}", res[:, i]))
        rows.append(_summ("N", self.total))
        return rows


def _summ(name, d):
    qs = np.quantile(d, QUANTILES)
    return {"quantity": name, "mean": d.mean(), "sd": d.std(ddof=1) if len(d) > 1 else 0.0,
            "q025": qs[0], "q50": qs[1], "q975": qs[2]}


def predictive_complete(run: ChainRun, x: Triangle, stream: RngStream, strict: bool = False) -> ReserveSummary:
    """Simulate the lower-right cells for every kept draw.

    Each row continues from that draw's observed-cell latents, so the
    moving-average window reaches across the diagonal. The sampler only
    enforces the rate constraint on observed cells, so a posterior draw can
    make a forecast cell infeasible; after ``MAX_REDRAWS`` redraws such
    draws get a zero residual rate (or ``SimulationError`` if ``strict``).
    """
    rng = stream.generator
    n, q, T = x.n, run.q, len(run)
    mask = x.mask
    y = run.y.copy()
    z = run.z.copy()
    cells = np.broadcast_to(x.values, (T, n, n)).copy()
    gam = run.gamma
    clamped = 0
    for i in range(1, n):
        a = run.alpha[:, i].astype(float)
        for j in range(n - i, n):
            carry = np.zeros(T)
            for l in range(1, q + 1):
                if j - l >= 0:
                    carry += z[:, i, j - l] * gam[:, j - l]
            zj = rng.gamma(a, run.pi[:, j])
            bad = zj * (1.0 - gam[:, j]) - carry < 0
            tries = 0
            while bad.any() and tries < MAX_REDRAWS:
                tries += 1
                zj[bad] = rng.gamma(a[bad], run.pi[bad, j])
                bad = zj * (1.0 - gam[:, j]) - carry < 0
            if bad.any():
                msg = (f"rate constraint infeasible predicting cell ({i + 1},{j + 1}) "
                       f"for {bad.sum()} of {T} draws")
                if strict:
                    raise SimulationError(msg)
                clamped += int(bad.sum())
                warnings.warn(msg + "; residual rate clamped at zero", RuntimeWarning)
            z[:, i, j] = zj
            y[:, i, j] = rng.poisson(zj * gam[:, j])
            window = np.zeros(T, dtype=np.int64)
            rate = zj.copy()
            for l in range(q + 1):
                if j - l >= 0:
                    window += y[:, i, j - l]
                    rate -= z[:, i, j - l] * gam[:, j - l]
            cells[:, i, j] = window + rng.poisson(np.maximum(rate, 0.0))
    return ReserveSummary(cells, mask, clamped)


# ---------------------------------------------------------------------------
# fit statistics


def _conditional_moments(run: ChainRun, x: Triangle):
    """Per-draw mean and rate of each observed cell given that draw's latents.

    X = sum of the y window + Poisson(rate residual), so the conditional
    mean is window + rate and the conditional variance is the rate.
    Returns ``(window, rate)`` arrays of shape ``(T, n_obs)``.
    """
    n, q = x.n, run.q
    mask = x.mask
    win = np.zeros_like(run.y)
    gz = run.z * run.gamma[:, None, :]
    rate = run.z.copy()
    for l in range(q + 1):
        win[:, :, l:] += run.y[:, :, : n - l]
        rate[:, :, l:] -= gz[:, :, : n - l]
    return win[:, mask], rate[:, mask]


def log_ordinates(run: ChainRun, x: Triangle) -> np.ndarray:
    """``(T, n_obs)`` log Poisson ordinates of the observed counts given each draw."""
    win, rate = _conditional_moments(run, x)
    e = x.values[x.mask][None, :] - win
    with np.errstate(divide="ignore", invalid="ignore"):
        out = e * np.log(np.maximum(rate, 0.0)) - rate - gammaln(e + 1.0)
    out = np.where((e == 0) & (rate == 0), 0.0, out)
    bad = (e < 0) | (rate < 0) | ((rate == 0) & (e != 0))
    return np.where(bad, -np.inf, out)


def log_cpo(run: ChainRun, x: Triangle) -> np.ndarray:
    """Harmonic-mean estimate of log CPO per observed cell (row-major)."""
    lo = log_ordinates(run, x)
    T = lo.shape[0]
    return -(logsumexp(-lo, axis=0) - np.log(T))


def lpml(run: ChainRun, x: Triangle) -> float:
    lc = log_cpo(run, x)
    bad = ~np.isfinite(lc)
    if bad.any():
        warnings.warn(f"{bad.sum()} cell(s) with zero predictive ordinate skipped in LPML", RuntimeWarning)
    return float(lc[~bad].sum())


def _predictive_moments(run: ChainRun, x: Triangle):
    win, rate = _conditional_moments(run, x)
    cond_mean = win + rate
    mean = cond_mean.mean(axis=0)
    var = rate.mean(axis=0) + cond_mean.var(axis=0)
    return mean, var


def bias(run: ChainRun, x: Triangle) -> float:
    mean, _ = _predictive_moments(run, x)
    return float(np.mean((mean - x.values[x.mask]) ** 2))


def pvar(run: ChainRun, x: Triangle) -> float:
    _, var = _predictive_moments(run, x)
    return float(np.mean(var))


@dataclass(frozen=True)
class FitStats:
    q: int
    lpml: float
    bias: float
    pvar: float


def fit_stats(run: ChainRun, x: Triangle) -> FitStats:
    return FitStats(run.q, lpml(run, x), bias(run, x), pvar(run, x))


def select_q(x: Triangle, q_grid, config: ChainConfig) -> list[FitStats]:
    """Fit once per order in ``q_grid`` (same seed for each) and score each fit."""
    out = []
    for q in q_grid:
        run = run_chain(x, replace(config, q=int(q)))
        out.append(fit_stats(run, x))
        log.info("q=%d lpml=%.3f bias=%.3f pvar=%.3f", q, out[-1].lpml, out[-1].bias, out[-1].pvar)
    return out


def best_orders(stats: list[FitStats]) -> dict:
    return {
        "lpml": max(stats, key=lambda s: s.lpml).q,
        "bias": min(stats, key=lambda s: s.bias).q,
        "pvar": min(stats, key=lambda s: s.pvar).q,
    }


def rows_to_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    if not rows:
        return ""
    w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return out.getvalue()
