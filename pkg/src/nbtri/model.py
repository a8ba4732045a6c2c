"""Negative binomial moving-average model for run-off triangles.

Hierarchy, per origin row i and development column j::

    Z[i,j]            ~ Gamma(alpha_i, rate 1/pi_j)
    Y[i,j] | Z        ~ Poisson(Z[i,j] * gamma_j)
    X[i,j] - sum_{l=0..q} Y[i,j-l] | Y, Z
                      ~ Poisson(Z[i,j] - sum_{l=0..q} Z[i,j-l] * gamma_{j-l})

with Y = Z = 0 for columns before the first. Marginally every
X[i,j] ~ NB(alpha_i, 1/(1+pi_j)); gamma and q only shape the dependence
along a row.

Public functions that take cell or column indices use 1-based indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

from . import _kernels as K
from .distributions import RngStream, log_pdf_dirichlet
from .triangle import Triangle, staircase_mask

MAX_REDRAWS = 1000


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ModelParams:
    alpha: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray
    q: int = 0

    def __post_init__(self):
        alpha = np.asarray(self.alpha)
        if not np.issubdtype(alpha.dtype, np.integer):
            if np.any(alpha != np.round(alpha)):
                raise ValueError("alpha must be integer valued")
        alpha = alpha.astype(np.int64)
        pi = np.asarray(self.pi, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        n = len(alpha)
        if pi.shape != (n,) or gamma.shape != (n,):
            raise ValueError("alpha, pi and gamma must have the same length")
        if np.any(alpha < 1):
            raise ValueError("alpha must be >= 1")
        if np.any(pi < 0) or np.any(pi > 1) or abs(pi.sum() - 1.0) > 1e-9:
            raise ValueError("pi must lie on the simplex")
        if np.any(gamma < 0):
            raise ValueError("gamma must be nonnegative")
        if int(self.q) < 0:
            raise ValueError("q must be nonnegative")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "q", int(self.q))

    @property
    def n(self) -> int:
        return len(self.alpha)

    @classmethod
    def simulation_study(cls, n: int = 10, alpha: int = 1000, gamma: float = 0.15, q: int = 2):
        """Decreasing development pattern pi_j = 2(n-j+1)/(n(n+1))."""
        j = np.arange(1, n + 1)
        pi = 2.0 * (n - j + 1) / (n * (n + 1))
        return cls(np.full(n, alpha), pi, np.full(n, gamma, dtype=float), q)


@dataclass(eq=False)
class LatentState:
    """Latent counts ``y`` and rates ``z``; only observed cells are meaningful during fitting."""

    y: np.ndarray
    z: np.ndarray

    def copy(self) -> "LatentState":
        return LatentState(self.y.copy(), self.z.copy())


@dataclass(frozen=True, eq=False)
class Hyperparams:
    p_alpha: float = 0.01
    a_gamma: float = 1.0
    b_gamma: float = 2.0
    a: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not 0 < self.p_alpha < 1:
            raise ValueError("p_alpha must lie in (0, 1)")
        if self.a_gamma <= 0 or self.b_gamma <= 0:
            raise ValueError("a_gamma and b_gamma must be positive")
        if self.a is not None:
            a = np.asarray(self.a, dtype=float)
            if np.any(a <= 0):
                raise ValueError("Dirichlet concentrations must be positive")
            object.__setattr__(self, "a", a)

    def dirichlet(self, n: int) -> np.ndarray:
        if self.a is None:
            return np.full(n, 0.5)
        if len(self.a) != n:
            raise ValueError(f"Dirichlet vector has length {len(self.a)}, triangle has n={n}")
        return self.a


# ---------------------------------------------------------------------------
# forward simulation


def simulate_many(params: ModelParams, stream: RngStream, reps: int, *, rows=None):
    """Simulate ``reps`` complete n x n matrices.

    Returns ``(x, y, z)`` with shapes ``(reps, n, n)``. ``rows`` restricts
    the simulation to a subset of origin rows (all by default), which keeps
    big correlation studies cheap.
    """
    rng = stream.generator
    n, q = params.n, params.q
    rows = np.arange(n) if rows is None else np.asarray(rows)
    a = params.alpha[rows].astype(float)
    g = params.gamma
    z = np.zeros((reps, len(rows), n))
    for j in range(n):
        zj = rng.gamma(a, params.pi[j], size=(reps, len(rows)))
        carry = np.zeros((reps, len(rows)))
        for l in range(1, q + 1):
            if j - l >= 0:
                carry += z[:, :, j - l] * g[j - l]
        bad = zj * (1.0 - g[j]) - carry < 0
        tries = 0
        while bad.any():
            tries += 1
            if tries > MAX_REDRAWS:
                raise SimulationError(
                    f"rate constraint infeasible at development year {j + 1}; "
                    "gamma too large for this pi"
                )
            zj[bad] = rng.gamma(np.broadcast_to(a, bad.shape)[bad], params.pi[j])
            bad = zj * (1.0 - g[j]) - carry < 0
        z[:, :, j] = zj
    y = rng.poisson(z * g)
    window = np.zeros_like(y)
    rate = z.copy()
    for l in range(q + 1):
        window[:, :, l:] += y[:, :, : n - l]
        rate[:, :, l:] -= z[:, :, : n - l] * g[: n - l]
    x = window + rng.poisson(np.maximum(rate, 0.0))
    return x, y, z


def simulate_triangle(params: ModelParams, stream: RngStream):
    """One complete n x n draw plus its latents."""
    x, y, z = simulate_many(params, stream, 1)
    return x[0], LatentState(y[0], z[0])


def marginal_correlation(params: ModelParams, j: int, k: int) -> float:
    """Corr(X[i,j], X[i,j+k]) for 1-based column ``j`` and lag ``k >= 1``."""
    n, q = params.n, params.q
    if k < 1 or j < 1 or j + k > n:
        raise IndexError(f"need 1 <= j, k >= 1 and j+k <= n; got j={j}, k={k}, n={n}")
    if k > q:
        return 0.0
    pi, g = params.pi, params.gamma
    num = sum(pi[j - l - 1] * g[j - l - 1] for l in range(q - k + 1) if j - l >= 1)
    den = np.sqrt(pi[j - 1] * (1 + pi[j - 1]) * pi[j + k - 1] * (1 + pi[j + k - 1]))
    return float(num / den)


# ---------------------------------------------------------------------------
# log joint (vectorised; independent of the sampler kernels)


def _windows(a: np.ndarray, q: int, weights=None) -> np.ndarray:
    """sum_{l=0..q} a[:, j-l] * weights[j-l] along rows."""
    w = a if weights is None else a * weights
    out = np.zeros_like(w)
    for l in range(q + 1):
        out[:, l:] += w[:, : w.shape[1] - l]
    return out


def residuals(x: np.ndarray, s: LatentState, params: ModelParams):
    """Count and rate residuals for every cell of a (complete or partial) matrix."""
    e = np.asarray(x) - _windows(s.y, params.q)
    r = s.z - _windows(s.z, params.q, params.gamma)
    return e, r


def _log_po(k, mu):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = xlogy(k, np.maximum(mu, 0.0)) - mu - gammaln(k + 1.0)
    bad = (k < 0) | (mu < 0) | ((mu == 0) & (k != 0))
    return np.where(bad, -np.inf, out)


def log_joint(x: Triangle, s: LatentState, params: ModelParams, h: Hyperparams) -> float:
    """Log of augmented likelihood times priors, up to a constant.

    Returns ``-inf`` whenever a support constraint is violated.
    """
    n, mask = x.n, x.mask
    y = np.where(mask, s.y, 0)
    z = np.where(mask, s.z, 0.0)
    if np.any(y[mask] < 0) or np.any(z[mask] <= 0):
        return -np.inf
    if np.any(params.pi <= 0):
        return -np.inf
    st = LatentState(y, z)
    e, r = residuals(x.values, st, params)
    lp = _log_po(e[mask], r[mask]).sum()
    lp += _log_po(y[mask], (z * params.gamma)[mask]).sum()
    a = np.broadcast_to(params.alpha[:, None].astype(float), (n, n))
    rate = np.broadcast_to(1.0 / params.pi, (n, n))
    lp += (a * np.log(rate) - gammaln(a) + (a - 1) * np.log(np.where(mask, z, 1.0)) - rate * z)[mask].sum()
    if not np.isfinite(lp):
        return -np.inf
    # priors; geometric on {1,2,...}
    lp += (params.alpha - 1).sum() * np.log1p(-h.p_alpha) + n * np.log(h.p_alpha)
    g = params.gamma
    lp += (h.a_gamma * np.log(h.b_gamma) - gammaln(h.a_gamma)) * n
    lp += (xlogy(h.a_gamma - 1.0, g) - h.b_gamma * g).sum()
    if h.a_gamma > 1 and np.any(g == 0):
        return -np.inf
    lp += log_pdf_dirichlet(params.pi, h.dirichlet(n))
    return float(lp) if np.isfinite(lp) else -np.inf


# ---------------------------------------------------------------------------
# full conditionals (1-based indices)


def _arrays(x: Triangle, s: LatentState, params: ModelParams):
    return (
        np.ascontiguousarray(x.values, dtype=np.int64),
        np.array(s.y, dtype=np.int64),
        np.array(s.z, dtype=float),
        params.alpha.copy(),
        params.pi.copy(),
        params.gamma.copy(),
    )


def log_fc_alpha(i: int, value: int, x: Triangle, s: LatentState, params: ModelParams, h: Hyperparams) -> float:
    """Unnormalised log full conditional of alpha_i; support {1, 2, ...}."""
    xv, y, z, alpha, pi, gamma = _arrays(x, s, params)
    if value != int(value):
        return -np.inf
    return float(K.local_alpha(i - 1, int(value), z, pi, x.n, h.p_alpha))


def log_fc_gamma(j: int, value: float, x: Triangle, s: LatentState, params: ModelParams, h: Hyperparams) -> float:
    """Support: gamma_j >= 0 and every rate residual it enters stays nonnegative."""
    xv, y, z, alpha, pi, gamma = _arrays(x, s, params)
    gamma[j - 1] = value
    return float(K.local_gamma(j - 1, xv, y, z, gamma, params.q, x.n, h.a_gamma, h.b_gamma))


def log_fc_pi(j: int, value: float, x: Triangle, s: LatentState, params: ModelParams, h: Hyperparams) -> float:
    """pi_j for j < n; pi_n is derived as one minus the others."""
    n = x.n
    if not 1 <= j <= n - 1:
        raise IndexError("pi_n is derived, not sampled")
    xv, y, z, alpha, pi, gamma = _arrays(x, s, params)
    pi[j - 1] = value
    K.refresh_last_pi(pi, n)
    return float(K.local_pi(j - 1, z, alpha, pi, n, h.dirichlet(n)))


def log_fc_y(i: int, j: int, value: int, x: Triangle, s: LatentState, params: ModelParams, h: Hyperparams = None) -> float:
    """Support: integers keeping every count residual in the window nonnegative."""
    xv, y, z, alpha, pi, gamma = _arrays(x, s, params)
    if value != int(value):
        return -np.inf
    y[i - 1, j - 1] = int(value)
    return float(K.local_y(i - 1, j - 1, xv, y, z, gamma, params.q, x.n))


def log_fc_z(i: int, j: int, value: float, x: Triangle, s: LatentState, params: ModelParams, h: Hyperparams = None) -> float:
    """Support: z > 0 keeping every rate residual it enters nonnegative."""
    xv, y, z, alpha, pi, gamma = _arrays(x, s, params)
    z[i - 1, j - 1] = value
    return float(K.local_z(i - 1, j - 1, xv, y, z, alpha, pi, gamma, params.q, x.n))


def gamma_upper_bound(j: int, x: Triangle, s: LatentState, params: ModelParams) -> float:
    """Largest gamma_j keeping all rate residuals nonnegative (1-based j)."""
    n, q = x.n, params.q
    if q == 0:
        return 1.0
    g = params.gamma.copy()
    g[j - 1] = 0.0
    bound = np.inf
    for i in range(n - j + 1):
        for k in range(j - 1, min(j - 1 + q, n - i - 1) + 1):
            other = s.z[i, k] - sum(s.z[i, k - l] * g[k - l] for l in range(q + 1) if k - l >= 0)
            bound = min(bound, other / s.z[i, j - 1])
    return float(bound)


def feasible_init(x: Triangle, params: ModelParams) -> LatentState:
    """Y = 0 and Z = max(x, 1) on observed cells.

    Feasible whenever the window sums of gamma leave every rate residual
    nonnegative; always so at gamma = 0.
    """
    mask = x.mask
    y = np.zeros((x.n, x.n), dtype=np.int64)
    z = np.where(mask, np.maximum(x.values, 1), 0).astype(float)
    return LatentState(y, z)
