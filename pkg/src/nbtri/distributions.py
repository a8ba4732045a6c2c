"""Log densities and seeded variate streams for the laws the model uses.

The negative binomial is parameterised as NB(r, 1/(1+pi)): mean r*pi and
variance r*pi*(1+pi). Gamma laws take a rate, not a scale.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "RngStream",
    "log_pmf_poisson",
    "log_pmf_negbin",
    "log_pdf_gamma",
    "log_pmf_geometric",
    "log_pdf_dirichlet",
    "sample_poisson",
    "sample_gamma",
    "sample_uniform",
]


class RngStream:
    """Independent, reproducible variate stream keyed by ``(seed, stream_id)``.

    Streams with the same seed and different ids are spawned from one
    ``SeedSequence`` and are statistically independent.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def _scalar_or_array(v):
    return v.item() if isinstance(v, np.ndarray) and v.ndim == 0 else v


def log_pmf_poisson(x, mu):
    x = np.asarray(x)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("Poisson mean must be nonnegative")
    out = xlogy(x, mu) - mu - gammaln(x + 1.0)
    out = np.where(x < 0, -np.inf, out)
    return _scalar_or_array(out)


def log_pmf_negbin(x, r, pi):
    x = np.asarray(x)
    r = np.asarray(r, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any(r <= 0) or np.any(pi <= 0):
        raise ValueError("negative binomial needs r > 0 and pi > 0")
    out = (
        gammaln(x + r) - gammaln(r) - gammaln(x + 1.0)
        - r * np.log1p(pi)
        + x * (np.log(pi) - np.log1p(pi))
    )
    out = np.where(x < 0, -np.inf, out)
    return _scalar_or_array(out)


def log_pdf_gamma(z, shape, rate):
    z = np.asarray(z, dtype=float)
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("gamma shape and rate must be positive")
    if np.any(z <= 0):
        raise ValueError("gamma density evaluated at a nonpositive point")
    out = shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(z) - rate * z
    return _scalar_or_array(out)


def log_pmf_geometric(k, p):
    """Geometric law on {1, 2, ...}: p * (1-p)**(k-1)."""
    if not 0 < p < 1:
        raise ValueError("geometric p must lie in (0, 1)")
    k = np.asarray(k)
    out = np.where(k >= 1, np.log(p) + (k - 1) * np.log1p(-p), -np.inf)
    return _scalar_or_array(out)


def log_pdf_dirichlet(pi, a):
    pi = np.asarray(pi, dtype=float)
    a = np.asarray(a, dtype=float)
    if pi.shape != a.shape:
        raise ValueError("pi and a must have the same length")
    if np.any(a <= 0):
        raise ValueError("Dirichlet concentrations must be positive")
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
        raise ValueError("pi is not on the simplex")
    if np.any((pi == 0) & (a < 1)):
        raise ValueError("Dirichlet density is infinite at a boundary point with a_j < 1")
    return float(gammaln(a.sum()) - gammaln(a).sum() + xlogy(a - 1.0, pi).sum())


def sample_poisson(stream: RngStream, mu, size=None):
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("Poisson mean must be nonnegative")
    return stream.generator.poisson(mu, size=size)


def sample_gamma(stream: RngStream, shape, rate, size=None):
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValueError("gamma shape and rate must be positive")
    return stream.generator.gamma(shape, 1.0 / rate, size=size)


def sample_uniform(stream: RngStream, low=0.0, high=1.0, size=None):
    return stream.generator.uniform(low, high, size=size)
