"""Metropolis-within-Gibbs sampler with uniform random-walk proposals.

Step sizes are kept per node and tuned during burn-in only: every 200 scans
each step is multiplied by 1.1 if that node accepted more than 40% of its
proposals in the window, or by 0.9 if it accepted fewer than 20%.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels as K
from .distributions import RngStream
from .model import Hyperparams, LatentState, ModelParams, feasible_init, log_joint
from .triangle import Triangle

BLOCKS = ("alpha", "gamma", "pi", "y", "z")
ADAPT_WINDOW = 200


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 50_000
    burn_in: int = 5_000
    thinning: int = 20
    seed: int = 0
    stream_id: int = 0
    q: int = 0
    hyper: Hyperparams = field(default_factory=Hyperparams)
    adapt: bool = True
    delta_alpha: float = 5.0
    delta_gamma: float = 0.05
    delta_pi: float = 0.01
    delta_y: float = 2.0
    delta_z_frac: float = 0.1
    fix_pi: tuple | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.thinning < 1:
            raise ValueError("iterations and thinning must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.q < 0:
            raise ValueError("q must be nonnegative")
        if min(self.delta_alpha, self.delta_gamma, self.delta_pi, self.delta_y, self.delta_z_frac) <= 0:
            raise ValueError("step sizes must be positive")

    @property
    def n_kept(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning

    def as_dict(self) -> dict:
        h = self.hyper
        return {
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "q": self.q,
            "p_alpha": h.p_alpha,
            "a_gamma": h.a_gamma,
            "b_gamma": h.b_gamma,
            "a_dirichlet": "default" if h.a is None else " ".join(repr(float(v)) for v in h.a),
            "adapt": self.adapt,
            "delta_alpha": self.delta_alpha,
            "delta_gamma": self.delta_gamma,
            "delta_pi": self.delta_pi,
            "delta_y": self.delta_y,
            "delta_z_frac": self.delta_z_frac,
        }


@dataclass(eq=False)
class ChainRun:
    """Thinned post-burn-in draws. Latent arrays are ``(T, n, n)``; unobserved cells are zero."""

    alpha: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray
    y: np.ndarray
    z: np.ndarray
    q: int
    acceptance: dict
    config: ChainConfig | None = None
    wall_time: float = 0.0

    def __len__(self):
        return len(self.alpha)

    @property
    def n(self) -> int:
        return self.alpha.shape[1]

    def params(self, t: int) -> ModelParams:
        return ModelParams(self.alpha[t], self.pi[t], self.gamma[t], self.q)

    def state(self, t: int) -> LatentState:
        return LatentState(self.y[t], self.z[t])


# ---------------------------------------------------------------------------
# single MH step (generic, used for testing and small problems)


@dataclass(frozen=True)
class Support:
    lower: float = -np.inf
    upper: float = np.inf
    integer: bool = False

    def __contains__(self, v) -> bool:
        if self.integer and v != int(v):
            return False
        return self.lower <= v <= self.upper


def mh_step(log_target, current, delta, support: Support, stream: RngStream):
    """One uniform random-walk step; returns ``(value, accepted)``."""
    u = stream.generator.random(2)
    if support.integer:
        prop = int(K.propose_int(int(current), float(delta), u[0]))
    else:
        prop = float(K.propose_real(float(current), float(delta), u[0]))
    if prop not in support:
        return current, False
    lp = log_target(prop)
    dlog = lp - log_target(current) if np.isfinite(lp) else -np.inf
    if K.accept(dlog, u[1]):
        return prop, True
    return current, False


# ---------------------------------------------------------------------------
# chain state


def initial_params(x: Triangle, q: int, fix_pi=None) -> ModelParams:
    n, mask = x.n, x.mask
    alpha = np.maximum(1, np.round(x.values.sum(axis=1))).astype(np.int64)
    if fix_pi is not None:
        pi = np.asarray(fix_pi, dtype=float)
    else:
        means = np.array([x.values[: n - j, j].mean() for j in range(n)], dtype=float)
        means = np.maximum(means, 1e-3 * max(means.max(), 1.0))
        pi = means / means.sum()
    return ModelParams(alpha, pi, np.zeros(n), q)


def _initial_pi_steps(pi, alpha, cap):
    """Twice the rough conditional sd of each free pi_j, capped at ``cap``.

    A move of pi_j shifts the derived pi_n by the same amount, and pi_n is
    pinned to relative precision 1/sqrt(alpha_1) by the single cell in its
    column, so the usable step is bounded by both scales.
    """
    n = len(pi)
    if n < 2:
        return np.zeros(0)
    col_alpha = np.cumsum(alpha)[::-1][: n - 1]
    own = pi[: n - 1] / np.sqrt(np.maximum(col_alpha, 1))
    last = pi[n - 1] / np.sqrt(max(alpha[0], 1))
    return np.minimum(2.0 * np.minimum(own, last), cap)


class _Chain:
    """Mutable arrays driven by the kernel."""

    def __init__(self, x: Triangle, params: ModelParams, state: LatentState, cfg: ChainConfig):
        n = x.n
        self.n = n
        self.q = params.q
        self.h = cfg.hyper
        self.a_dir = np.ascontiguousarray(self.h.dirichlet(n), dtype=float)
        self.x = np.ascontiguousarray(x.values, dtype=np.int64)
        self.y = np.array(state.y, dtype=np.int64)
        self.z = np.array(state.z, dtype=float)
        self.alpha = params.alpha.copy()
        self.pi = params.pi.copy()
        self.gamma = params.gamma.copy()
        if self.h.a_gamma != 1.0:
            self.gamma = np.maximum(self.gamma, 1e-6)
        mask = x.mask
        self.mask = mask
        rows = n - np.arange(n)
        self.d = {
            "alpha": np.maximum(cfg.delta_alpha, 2.5 * np.sqrt(self.alpha / rows)),
            "gamma": np.full(n, cfg.delta_gamma),
            "pi": _initial_pi_steps(self.pi, self.alpha, cfg.delta_pi),
            "y": np.where(mask, np.maximum(cfg.delta_y, 0.5 * np.sqrt(self.x)), 0.0),
            "z": np.where(mask, np.maximum(cfg.delta_z_frac * self.z, 1e-3), 0.0),
        }
        self.update_pi = cfg.fix_pi is None and n > 1
        self.reset_counts()

    def reset_counts(self):
        n = self.n
        self.acc = {
            "alpha": np.zeros(n, dtype=np.int64),
            "gamma": np.zeros(n, dtype=np.int64),
            "pi": np.zeros(max(n - 1, 0), dtype=np.int64),
            "y": np.zeros((n, n), dtype=np.int64),
            "z": np.zeros((n, n), dtype=np.int64),
        }

    def run(self, uniforms: np.ndarray):
        K.sweep(
            uniforms.shape[0], self.x, self.y, self.z, self.alpha, self.pi, self.gamma, self.q,
            self.h.p_alpha, self.h.a_gamma, self.h.b_gamma, self.a_dir,
            self.d["alpha"], self.d["gamma"], self.d["pi"], self.d["y"], self.d["z"],
            self.acc["alpha"], self.acc["gamma"], self.acc["pi"], self.acc["y"], self.acc["z"],
            uniforms, self.update_pi,
        )

    def node_rates(self, scans: int) -> dict:
        out = {}
        for b in BLOCKS:
            a = self.acc[b] / scans
            out[b] = a[self.mask] if b in ("y", "z") else a
        return out

    def adapt(self, scans: int):
        for b in BLOCKS:
            if b == "pi" and not self.update_pi:
                continue
            rate = self.acc[b] / scans
            d = self.d[b]
            live = self.mask if b in ("y", "z") else np.ones(d.shape, dtype=bool)
            d[live & (rate > 0.40)] *= 1.1
            d[live & (rate < 0.20)] *= 0.9
            if b in ("alpha", "y"):
                np.maximum(d, 1.0, out=d, where=live)
            elif b == "pi":
                np.minimum(d, 0.5, out=d)
            elif b == "gamma":
                np.minimum(d, 1.0, out=d)

    def block_rates(self, scans: int) -> dict:
        out = {}
        for b in BLOCKS:
            if b == "pi" and not self.update_pi:
                out[b] = float("nan")
                continue
            a = self.acc[b][self.mask] if b in ("y", "z") else self.acc[b]
            out[b] = float(a.sum() / (a.size * scans)) if a.size else float("nan")
        return out

    def params(self) -> ModelParams:
        return ModelParams(self.alpha.copy(), self.pi.copy(), self.gamma.copy(), self.q)

    def state(self) -> LatentState:
        return LatentState(self.y.copy(), self.z.copy())


def gibbs_scan(x: Triangle, state: LatentState, params: ModelParams, config: ChainConfig, stream: RngStream):
    """One full scan at the config's initial step sizes; returns ``(state, params)``."""
    ch = _Chain(x, params, state, replace(config, q=params.q))
    u = stream.generator.random((1, K.n_nodes(x.n), 2))
    ch.run(u)
    return ch.state(), ch.params()


def run_chain(x: Triangle, config: ChainConfig, init: tuple | None = None) -> ChainRun:
    """Initialise, burn in (adapting step sizes), then store thinned draws."""
    t0 = time.perf_counter()
    if init is None:
        params = initial_params(x, config.q, config.fix_pi)
        state = feasible_init(x, params)
    else:
        params, state = init
    if not np.isfinite(log_joint(x, state, params, config.hyper)):
        raise ValueError("initial state is infeasible")
    ch = _Chain(x, params, state, config)
    rng = RngStream(config.seed, config.stream_id).generator
    n_nodes = K.n_nodes(x.n)

    done = 0
    while done < config.burn_in:
        k = min(ADAPT_WINDOW, config.burn_in - done)
        ch.reset_counts()
        ch.run(rng.random((k, n_nodes, 2)))
        if config.adapt:
            ch.adapt(k)
        done += k

    T, n = config.n_kept, x.n
    out_alpha = np.empty((T, n), dtype=np.int64)
    out_pi = np.empty((T, n))
    out_gamma = np.empty((T, n))
    out_y = np.empty((T, n, n), dtype=np.int64)
    out_z = np.empty((T, n, n))
    ch.reset_counts()
    for t in range(T):
        ch.run(rng.random((config.thinning, n_nodes, 2)))
        out_alpha[t] = ch.alpha
        out_pi[t] = ch.pi
        out_gamma[t] = ch.gamma
        out_y[t] = ch.y
        out_z[t] = ch.z
    acceptance = ch.block_rates(max(T * config.thinning, 1))
    return ChainRun(
        out_alpha, out_pi, out_gamma, out_y, out_z, config.q, acceptance,
        config=config, wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# CSV export


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def chain_to_csv(run: ChainRun) -> str:
    n = run.n
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(
        [f"alpha_{i}" for i in range(1, n + 1)]
        + [f"gamma_{j}" for j in range(1, n + 1)]
        + [f"pi_{j}" for j in range(1, n + 1)]
    )
    for t in range(len(run)):
        w.writerow([_fmt(v) for v in run.alpha[t]] + [_fmt(v) for v in run.gamma[t]] + [_fmt(v) for v in run.pi[t]])
    return out.getvalue()


def latents_to_csv(run: ChainRun, which: str) -> str:
    n = run.n
    arr = run.y if which == "y" else run.z
    cells = [(i, j) for i in range(n) for j in range(n - i)]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f"{which}_{i + 1}_{j + 1}" for i, j in cells])
    for t in range(len(run)):
        w.writerow([_fmt(arr[t, i, j]) for i, j in cells])
    return out.getvalue()


def acceptance_to_text(run: ChainRun) -> str:
    lines = [f"{b}={run.acceptance[b]:.6f}" for b in BLOCKS]
    lines.append(f"draws={len(run)}")
    return "\n".join(lines) + "\n"


def write_chain(run: ChainRun, outdir) -> dict:
    outdir = Path(outdir)
    paths = {
        "chain": outdir / "chain.csv",
        "latent_y": outdir / "latent_y.csv",
        "latent_z": outdir / "latent_z.csv",
        "acceptance": outdir / "acceptance.txt",
    }
    paths["chain"].write_text(chain_to_csv(run))
    paths["latent_y"].write_text(latents_to_csv(run, "y"))
    paths["latent_z"].write_text(latents_to_csv(run, "z"))
    paths["acceptance"].write_text(acceptance_to_text(run))
    return paths


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_chain(outdir, q: int) -> ChainRun:
    outdir = Path(outdir)
    header, rows = _read_rows(outdir / "chain.csv")
    n = len(header) // 3
    T = len(rows)
    alpha = np.array([[int(v) for v in r[:n]] for r in rows], dtype=np.int64).reshape(T, n)
    gamma = np.array([[float(v) for v in r[n: 2 * n]] for r in rows]).reshape(T, n)
    pi = np.array([[float(v) for v in r[2 * n:]] for r in rows]).reshape(T, n)
    cells = [(i, j) for i in range(n) for j in range(n - i)]
    y = np.zeros((T, n, n), dtype=np.int64)
    z = np.zeros((T, n, n))
    _, yrows = _read_rows(outdir / "latent_y.csv")
    _, zrows = _read_rows(outdir / "latent_z.csv")
    for t in range(T):
        for c, (i, j) in enumerate(cells):
            y[t, i, j] = int(yrows[t][c])
            z[t, i, j] = float(zrows[t][c])
    acceptance = {}
    for line in (outdir / "acceptance.txt").read_text().splitlines():
        k, v = line.split("=", 1)
        if k in BLOCKS:
            acceptance[k] = float(v)
    return ChainRun(alpha, pi, gamma, y, z, q, acceptance)
