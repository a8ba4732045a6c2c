"""``nbtri`` command line: simulate, fit, select-q, predict, chainladder, report.

Every command writes plain CSV / key=value text plus one ``manifest.txt``
into its output directory. Options may also come from a key=value file
given with ``--config``; explicit flags take precedence.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .chainladder import ChainLadderError, chain_ladder, round_half_away
from .datasets import DATASETS, load_dataset
from .distributions import RngStream
from .model import Hyperparams, ModelParams, SimulationError, simulate_triangle
from .predict import best_orders, fit_stats, predictive_complete, rows_to_csv, select_q
from .report import acceptance_rows, correlation_summary, parameter_summary
from .sampler import ChainConfig, read_chain, run_chain, write_chain
from .triangle import Triangle, TriangleError, format_matrix, format_triangle, read_triangle

log = logging.getLogger("nbtri")


class ManifestError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# manifests


def write_manifest(outdir: Path, command: str, config: dict, checksum: str | None, artifacts, t0: float):
    lines = [f"command={command}", f"version={__version__}"]
    lines += [f"{k}={v}" for k, v in config.items()]
    if checksum is not None:
        lines.append(f"dataset_checksum={checksum}")
    lines.append("artifacts=" + ",".join(sorted(Path(p).name for p in artifacts)))
    lines.append(f"wall_time_s={time.perf_counter() - t0:.3f}")
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_kv(path: Path) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def read_manifest(d: Path) -> dict:
    p = Path(d) / "manifest.txt"
    if not p.exists():
        raise ManifestError(f"missing manifest in {d}")
    return read_kv(p)


def _num(v) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# shared helpers


def _load_input(args) -> Triangle:
    if getattr(args, "dataset", None):
        return load_dataset(args.dataset)
    if not getattr(args, "input", None):
        raise ValueError("give --input FILE or --dataset NAME")
    return read_triangle(args.input)


def _source(args) -> dict:
    if getattr(args, "dataset", None):
        return {"dataset": args.dataset}
    return {"input": str(args.input)}


def _outdir(args) -> Path:
    d = Path(args.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _chain_config(args, q: int | None = None) -> ChainConfig:
    return ChainConfig(
        iterations=args.iterations,
        burn_in=args.burn_in,
        thinning=args.thin,
        seed=args.seed,
        q=args.q if q is None else q,
        hyper=Hyperparams(args.p_alpha, args.a_gamma, args.b_gamma),
        adapt=not args.no_adapt,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    params = ModelParams.simulation_study(args.n, args.alpha, args.gamma, args.q)
    full, latents = simulate_triangle(params, RngStream(args.seed))
    tri = Triangle.from_full(full)
    files = {
        "full_triangle.csv": format_matrix(full),
        "triangle.csv": format_triangle(tri),
        "mask.csv": format_matrix(tri.mask.astype(int)),
        "params.csv": "index,alpha,pi,gamma\n" + "".join(
            f"{j + 1},{int(params.alpha[j])},{_num(params.pi[j])},{_num(params.gamma[j])}\n" for j in range(params.n)
        ),
    }
    for name, text in files.items():
        (out / name).write_text(text)
    cfg = {"n": args.n, "alpha": args.alpha, "gamma": args.gamma, "q": args.q, "seed": args.seed}
    write_manifest(out, "simulate", cfg, tri.checksum(), files, t0)
    return 0


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    x = _load_input(args)
    cfg = _chain_config(args)
    run = run_chain(x, cfg)
    paths = write_chain(run, out)
    (out / "triangle.csv").write_text(format_triangle(x))
    write_manifest(out, "fit", {**_source(args), **cfg.as_dict()}, x.checksum(), list(paths.values()) + ["triangle.csv"], t0)
    log.info("fit q=%d: %d draws, acceptance %s", cfg.q, len(run), run.acceptance)
    return 0


def cmd_select_q(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    x = _load_input(args)
    grid = [int(v) for v in str(args.q_grid).split(",") if v.strip()]
    cfg = _chain_config(args, q=0)
    stats = select_q(x, grid, cfg)
    rows = [{"q": s.q, "lpml": s.lpml, "bias": s.bias, "pvar": s.pvar} for s in stats]
    (out / "fit_stats.csv").write_text(rows_to_csv(rows))
    best = best_orders(stats)
    (out / "best.txt").write_text("".join(f"{k}={v}\n" for k, v in best.items()))
    conf = {**_source(args), **cfg.as_dict()}
    conf.pop("q")
    conf["q_grid"] = ",".join(map(str, grid))
    write_manifest(out, "select-q", conf, x.checksum(), ["fit_stats.csv", "best.txt"], t0)
    for r in rows:
        print(f"q={r['q']}  LPML={r['lpml']:.2f}  BIAS={r['bias']:.2f}  PVAR={r['pvar']:.2f}")
    print("best: " + ", ".join(f"{k}->q={v}" for k, v in best.items()))
    return 0


def _load_fit(fit_dir: Path):
    man = read_manifest(fit_dir)
    if man.get("command") != "fit":
        raise ManifestError(f"{fit_dir} does not hold a fit")
    tri_path = fit_dir / "triangle.csv"
    if not tri_path.exists():
        raise ManifestError(f"missing triangle.csv in {fit_dir}")
    x = read_triangle(tri_path)
    if x.checksum() != man.get("dataset_checksum"):
        raise ManifestError(f"checksum mismatch between {tri_path} and its manifest")
    for name in ("chain.csv", "latent_y.csv", "latent_z.csv", "acceptance.txt"):
        if not (fit_dir / name).exists():
            raise ManifestError(f"missing {name} in {fit_dir}")
    run = read_chain(fit_dir, int(man["q"]))
    return x, run, man


def cmd_predict(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    fit_dir = Path(args.fit_dir)
    x, run, man = _load_fit(fit_dir)
    if args.q is not None and args.q != run.q:
        raise ManifestError(f"--q {args.q} does not match the fitted order q={run.q}")
    if args.input or args.dataset:
        other = _load_input(args)
        if other.checksum() != x.checksum():
            raise ManifestError("input triangle does not match the fitted triangle")
    summary = predictive_complete(run, x, RngStream(args.seed, 1), strict=args.strict)
    stats = fit_stats(run, x)
    res = summary.reserves
    draws = [{"draw": t + 1, **{f"N_{i + 1}": int(res[t, i]) for i in range(1, x.n)}, "N": int(summary.total[t])}
             for t in range(len(run))]
    files = {
        "cells.csv": rows_to_csv(summary.cell_summary()),
        "reserves.csv": rows_to_csv(summary.reserve_summary()),
        "reserve_draws.csv": rows_to_csv(draws),
        "fit_stats.txt": f"q={stats.q}\nlpml={_num(stats.lpml)}\nbias={_num(stats.bias)}\npvar={_num(stats.pvar)}\n"
                         f"clamped_draws={summary.clamped}\n",
    }
    for name, text in files.items():
        (out / name).write_text(text)
    write_manifest(out, "predict", {"fit_dir": str(fit_dir), "seed": args.seed, "q": run.q},
                   x.checksum(), files, t0)
    return 0


def cmd_chainladder(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    x = _load_input(args)
    r = chain_ladder(x)
    reserves = r.reserves
    files = {
        "completed.csv": format_matrix(r.rounded),
        "completed_unrounded.csv": format_matrix(np.vectorize(_num)(r.completed)),
        "forecast_mask.csv": format_matrix((~r.observed).astype(int)),
        "factors.csv": "development_year,factor\n" + "".join(
            f"{j + 1},{_num(f)}\n" for j, f in enumerate(r.factors)),
        "reserves.csv": "origin,reserve,rounded\n" + "".join(
            f"{i + 1},{_num(reserves[i])},{round_half_away(reserves[i])}\n" for i in range(x.n))
            + f"total,{_num(r.total)},{round_half_away(r.total)}\n",
    }
    for name, text in files.items():
        (out / name).write_text(text)
    write_manifest(out, "chainladder", _source(args), x.checksum(), files, t0)
    print(f"chain-ladder total reserve: {round_half_away(r.total)}")
    return 0


def cmd_report(args) -> int:
    t0 = time.perf_counter()
    out = _outdir(args)
    fit_dir = Path(args.fit_dir)
    x, run, man = _load_fit(fit_dir)
    files = {
        "parameters.csv": rows_to_csv(parameter_summary(run)),
        "acceptance.csv": rows_to_csv(acceptance_rows(run)),
    }
    corr = correlation_summary(run)
    files["correlations.csv"] = rows_to_csv(corr) if corr else "parameter,mean,q025,q50,q975\n"
    if args.predict_dir:
        pdir = Path(args.predict_dir)
        pman = read_manifest(pdir)
        if pman.get("dataset_checksum") != x.checksum():
            raise ManifestError("prediction and fit were made on different triangles")
        for name in ("reserves.csv", "fit_stats.txt"):
            if not (pdir / name).exists():
                raise ManifestError(f"missing {name} in {pdir}")
        files["reserves.csv"] = (pdir / "reserves.csv").read_text()
        files["fit_stats.txt"] = (pdir / "fit_stats.txt").read_text()
    for name, text in files.items():
        (out / name).write_text(text)
    write_manifest(out, "report", {"fit_dir": str(fit_dir), "predict_dir": args.predict_dir or ""},
                   x.checksum(), files, t0)
    return 0


# ---------------------------------------------------------------------------
# argument parsing

CHAIN_DEFAULTS = {"q": 1, "iterations": 50_000, "burn_in": 5_000, "thin": 20}
# manifest keys that are bookkeeping rather than settings
MANIFEST_ONLY = {"command", "version", "dataset_checksum", "artifacts", "wall_time_s", "stream_id",
                 "a_dirichlet", "delta_alpha", "delta_gamma", "delta_pi", "delta_y", "delta_z_frac"}
ALIASES = {"thinning": "thin", "adapt": "no_adapt"}


def _add_chain(p):
    p.add_argument("--p-alpha", type=float, default=0.01)
    p.add_argument("--a-gamma", type=float, default=1.0)
    p.add_argument("--b-gamma", type=float, default=2.0)
    p.add_argument("--no-adapt", action="store_true", help="keep initial step sizes")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("shared")
    g.add_argument("--input", help="wide CSV triangle")
    g.add_argument("--output-dir", default=".", help="directory for outputs")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--q", type=int, help="dependence order (default 1; 2 for simulate)")
    g.add_argument("--iterations", type=int, help=f"default {CHAIN_DEFAULTS['iterations']}")
    g.add_argument("--burn-in", type=int, help=f"default {CHAIN_DEFAULTS['burn_in']}")
    g.add_argument("--thin", type=int, help=f"default {CHAIN_DEFAULTS['thin']}")
    g.add_argument("--config", help="key=value file or an earlier manifest.txt; flags win")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nbtri", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a triangle from the MA(q) model")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--alpha", type=int, default=1000)
    p.add_argument("--gamma", type=float, default=0.15)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="run the Gibbs sampler")
    p.add_argument("--dataset", choices=sorted(DATASETS), help="bundled triangle")
    _add_chain(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select-q", parents=[common], help="compare LPML/BIAS/PVAR across orders")
    p.add_argument("--dataset", choices=sorted(DATASETS), help="bundled triangle")
    _add_chain(p)
    p.add_argument("--q-grid", default="0,1,2,3,4")
    p.set_defaults(func=cmd_select_q)

    p = sub.add_parser("predict", parents=[common], help="posterior predictive reserves from a fit")
    p.add_argument("--fit-dir", required=True)
    p.add_argument("--dataset", choices=sorted(DATASETS), help="check the fit against a bundled triangle")
    p.add_argument("--strict", action="store_true", help="fail instead of clamping infeasible forecast draws")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("chainladder", parents=[common], help="deterministic chain-ladder baseline")
    p.add_argument("--dataset", choices=sorted(DATASETS), help="bundled triangle")
    p.set_defaults(func=cmd_chainladder)

    p = sub.add_parser("report", parents=[common], help="posterior summary tables")
    p.add_argument("--fit-dir", required=True)
    p.add_argument("--predict-dir")
    p.set_defaults(func=cmd_report)
    return parser


def _coerce(action, value: str):
    if isinstance(action, argparse._StoreTrueAction):
        return value.lower() in {"1", "true", "yes"}
    return action.type(value) if action.type else value


def _config_defaults(sub: argparse.ArgumentParser, path: str, command: str) -> dict:
    conf = read_kv(Path(path))
    manifest = "command" in conf
    if manifest and conf["command"] != command:
        raise ValueError(f"{path} is a manifest for {conf['command']!r}, not {command!r}")
    actions = {a.dest: a for a in sub._actions}
    out, unknown = {}, []
    for k, v in conf.items():
        if manifest and k in MANIFEST_ONLY:
            continue
        dest = ALIASES.get(k, k)
        if k == "adapt":
            v = "false" if v.lower() in {"1", "true", "yes"} else "true"
        if dest not in actions or dest in {"config", "help", "output_dir"}:
            unknown.append(k)
            continue
        out[dest] = _coerce(actions[dest], v)
    if unknown:
        raise ValueError(f"unknown key(s) in {path}: {', '.join(sorted(unknown))}")
    return out


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        try:
            sub.set_defaults(**_config_defaults(sub, args.config, args.command))
        except (ValueError, OSError) as e:
            parser.error(str(e))
        args = parser.parse_args(argv)
    if args.command not in {"simulate", "fit", "select-q"}:
        return args
    defaults = dict(CHAIN_DEFAULTS, q={"simulate": 2, "fit": 1, "select-q": 0}[args.command])
    for k, v in defaults.items():
        if getattr(args, k) is None:
            setattr(args, k, v)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (TriangleError, ChainLadderError, SimulationError, ManifestError,
            ValueError, KeyError, FileNotFoundError) as e:
        print(f"nbtri {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
