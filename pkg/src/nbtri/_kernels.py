"""Hot loops of the Gibbs sampler.

Every function here is compiled with numba unless ``NBTRI_DISABLE_JIT`` is
set. Indices are 0-based; row ``i`` observes columns ``0 .. n-i-1``.

Each ``local_*`` returns the sum of the log-joint terms that involve one
coordinate, evaluated at whatever value currently sits in the arrays. The
difference of two such calls is the log ratio of the full conditional.
"""
import math

import numpy as np

from ._jit import njit

NEG_INF = -np.inf


@njit
def log_po(k, mu):
    if k < 0 or mu < 0.0:
        return NEG_INF
    if mu == 0.0:
        return 0.0 if k == 0 else NEG_INF
    return k * math.log(mu) - mu - math.lgamma(k + 1.0)


@njit
def rate_resid(z, gamma, i, k, q):
    r = z[i, k]
    for l in range(q + 1):
        c = k - l
        if c < 0:
            break
        r -= z[i, c] * gamma[c]
    return r


@njit
def count_resid(x, y, i, k, q):
    e = x[i, k]
    for l in range(q + 1):
        c = k - l
        if c < 0:
            break
        e -= y[i, c]
    return e


@njit
def resid_window(x, y, z, gamma, i, j, q, n):
    # cells (i, j..min(j+q, last observed)) whose residual involves column j
    s = 0.0
    last = min(j + q, n - i - 1)
    for k in range(j, last + 1):
        s += log_po(count_resid(x, y, i, k, q), rate_resid(z, gamma, i, k, q))
        if s == NEG_INF:
            return NEG_INF
    return s


@njit
def local_alpha(i, a, z, pi, n, p_alpha):
    if a < 1:
        return NEG_INF
    lg = math.lgamma(a)
    s = a * math.log1p(-p_alpha)
    for j in range(n - i):
        s += -a * math.log(pi[j]) - lg + (a - 1.0) * math.log(z[i, j])
    return s


@njit
def local_gamma(j, x, y, z, gamma, q, n, a_gamma, b_gamma):
    g = gamma[j]
    if g < 0.0:
        return NEG_INF
    s = -b_gamma * g
    if a_gamma != 1.0:
        if g == 0.0:
            return NEG_INF
        s += (a_gamma - 1.0) * math.log(g)
    for i in range(n - j):
        s += log_po(y[i, j], z[i, j] * g)
        if s == NEG_INF:
            return NEG_INF
        s += resid_window(x, y, z, gamma, i, j, q, n)
        if s == NEG_INF:
            return NEG_INF
    return s


@njit
def local_pi(j, z, alpha, pi, n, a_dir):
    # pi[n-1] must already hold 1 - sum(pi[:n-1])
    p = pi[j]
    last = pi[n - 1]
    if p <= 0.0 or last <= 0.0:
        return NEG_INF
    s = (a_dir[j] - 1.0) * math.log(p) + (a_dir[n - 1] - 1.0) * math.log(last)
    lp = math.log(p)
    for i in range(n - j):
        s += -alpha[i] * lp - z[i, j] / p
    s += -alpha[0] * math.log(last) - z[0, n - 1] / last
    return s


@njit
def local_y(i, j, x, y, z, gamma, q, n):
    v = y[i, j]
    if v < 0:
        return NEG_INF
    s = log_po(v, z[i, j] * gamma[j])
    if s == NEG_INF:
        return NEG_INF
    return s + resid_window(x, y, z, gamma, i, j, q, n)


@njit
def local_z(i, j, x, y, z, alpha, pi, gamma, q, n):
    v = z[i, j]
    if v <= 0.0:
        return NEG_INF
    s = (alpha[i] - 1.0) * math.log(v) - v / pi[j]
    s += log_po(y[i, j], v * gamma[j])
    if s == NEG_INF:
        return NEG_INF
    return s + resid_window(x, y, z, gamma, i, j, q, n)


@njit
def propose_int(cur, delta, u):
    """Symmetric discrete step drawn uniformly from {-d..-1, 1..d}, d = round(delta)."""
    d = int(delta + 0.5)
    if d < 1:
        d = 1
    k = int(u * 2 * d)
    if k >= 2 * d:
        k = 2 * d - 1
    if k < d:
        return cur + k - d
    return cur + k - d + 1


@njit
def propose_real(cur, delta, u):
    return cur + delta * (2.0 * u - 1.0)


@njit
def accept(dlog, u):
    if not dlog > NEG_INF:
        return False
    if dlog >= 0.0:
        return True
    if u <= 0.0:
        return True
    return math.log(u) < dlog


@njit
def refresh_last_pi(pi, n):
    s = 0.0
    for k in range(n - 1):
        s += pi[k]
    pi[n - 1] = 1.0 - s


@njit
def n_nodes(n):
    return 3 * n - 1 + n * (n + 1)


@njit
def sweep(
    n_sweeps, x, y, z, alpha, pi, gamma, q,
    p_alpha, a_gamma, b_gamma, a_dir,
    d_alpha, d_gamma, d_pi, d_y, d_z,
    acc_alpha, acc_gamma, acc_pi, acc_y, acc_z,
    uniforms, update_pi,
):
    """Run ``n_sweeps`` Gibbs scans in place.

    Node order per scan: alpha, gamma, pi[:n-1], y (row-major), z (row-major).
    Each node consumes ``uniforms[s, node, 0]`` for the proposal and
    ``uniforms[s, node, 1]`` for the accept test, used or not.
    """
    n = x.shape[0]
    for s in range(n_sweeps):
        node = 0
        for i in range(n):
            cur = alpha[i]
            prop = propose_int(cur, d_alpha[i], uniforms[s, node, 0])
            dlog = local_alpha(i, prop, z, pi, n, p_alpha) - local_alpha(i, cur, z, pi, n, p_alpha)
            if accept(dlog, uniforms[s, node, 1]):
                alpha[i] = prop
                acc_alpha[i] += 1
            node += 1

        for j in range(n):
            cur = gamma[j]
            prop = propose_real(cur, d_gamma[j], uniforms[s, node, 0])
            if prop >= 0.0:
                old = local_gamma(j, x, y, z, gamma, q, n, a_gamma, b_gamma)
                gamma[j] = prop
                dlog = local_gamma(j, x, y, z, gamma, q, n, a_gamma, b_gamma) - old
                if accept(dlog, uniforms[s, node, 1]):
                    acc_gamma[j] += 1
                else:
                    gamma[j] = cur
            node += 1

        for j in range(n - 1):
            if update_pi:
                cur = pi[j]
                prop = propose_real(cur, d_pi[j], uniforms[s, node, 0])
                if prop > 0.0:
                    old = local_pi(j, z, alpha, pi, n, a_dir)
                    pi[j] = prop
                    refresh_last_pi(pi, n)
                    dlog = local_pi(j, z, alpha, pi, n, a_dir) - old
                    if accept(dlog, uniforms[s, node, 1]):
                        acc_pi[j] += 1
                    else:
                        pi[j] = cur
                        refresh_last_pi(pi, n)
            node += 1

        for i in range(n):
            for j in range(n - i):
                cur = y[i, j]
                prop = propose_int(cur, d_y[i, j], uniforms[s, node, 0])
                if prop >= 0:
                    old = local_y(i, j, x, y, z, gamma, q, n)
                    y[i, j] = prop
                    dlog = local_y(i, j, x, y, z, gamma, q, n) - old
                    if accept(dlog, uniforms[s, node, 1]):
                        acc_y[i, j] += 1
                    else:
                        y[i, j] = cur
                node += 1

        for i in range(n):
            for j in range(n - i):
                cur = z[i, j]
                prop = propose_real(cur, d_z[i, j], uniforms[s, node, 0])
                if prop > 0.0:
                    old = local_z(i, j, x, y, z, alpha, pi, gamma, q, n)
                    z[i, j] = prop
                    dlog = local_z(i, j, x, y, z, alpha, pi, gamma, q, n) - old
                    if accept(dlog, uniforms[s, node, 1]):
                        acc_z[i, j] += 1
                    else:
                        z[i, j] = cur
                node += 1
