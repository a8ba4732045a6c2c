"""Time the sampler with numba kernels against the pure-Python fallback.

Each mode runs in its own interpreter since the JIT switch is read at import
time. Usage: python benchmarks/bench_sampler.py [--iterations N] [--dataset NAME]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = """
import json, sys, time
from dataclasses import replace
from nbtri import _jit
from nbtri.datasets import load_dataset
from nbtri.sampler import ChainConfig, run_chain
x = load_dataset(sys.argv[1])
cfg = ChainConfig(iterations=int(sys.argv[2]), burn_in=int(sys.argv[2]) // 5, thinning=10, seed=1, q=1)
run_chain(x, replace(cfg, iterations=20, burn_in=0, thinning=1))  # compile / warm caches
t0 = time.perf_counter()
run = run_chain(x, cfg)
dt = time.perf_counter() - t0
print(json.dumps({"jit": not _jit.DISABLED, "seconds": dt, "alpha_sum": int(run.alpha.sum()),
                  "gamma_sum": float(run.gamma.sum())}))
"""


def run_mode(disable: bool, dataset: str, iterations: int) -> dict:
    env = dict(os.environ, NBTRI_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", CHILD, dataset, str(iterations)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--iterations", type=int, default=500)
    ap.add_argument("--dataset", default="general_insurance")
    args = ap.parse_args()

    fast = run_mode(False, args.dataset, args.iterations)
    slow = run_mode(True, args.dataset, args.iterations)
    same = (fast["alpha_sum"], fast["gamma_sum"]) == (slow["alpha_sum"], slow["gamma_sum"])
    print(f"dataset={args.dataset} iterations={args.iterations}")
    print(f"numba_seconds={fast['seconds']:.4f}")
    print(f"python_seconds={slow['seconds']:.4f}")
    print(f"speedup={slow['seconds'] / fast['seconds']:.1f}")
    print(f"identical_draws={same}")


if __name__ == "__main__":
    main()
