"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--m 10000]

Prints one line per kernel with the best-of-``repeat`` wall time of each
backend and the speed-up. Both backends get identical inputs.
"""
import argparse
import timeit

import numpy as np

from dpeval import kernels
from dpeval import rng as rngmod
from dpeval.mdp import build_chain


def cases(m):
    mdp = build_chain(40, 0.5, 0.99)
    chain = (mdp._cum_start, mdp._cum_trans, mdp.absorbing_mask, mdp.rewards)
    states, rewards, offsets = kernels.sample_batch(*chain, m, rngmod.make_rng(0), 10**6)
    counts = np.bincount(np.concatenate([np.unique(states[a:b]) for a, b in zip(offsets[:-1], offsets[1:])]),
                         minlength=40).astype(np.int64)
    w = np.append(np.ones(39), 0.0)
    beta = 5.8e-4
    return {
        "sample_batch": lambda impl: impl.sample_batch(*chain, m, rngmod.make_rng(1), 10**6),
        "first_visit_stats": lambda impl: impl.first_visit_stats(states, rewards, offsets, 40, 0.99),
        "smooth_max_w": lambda impl: impl.smooth_max_w(counts, w, beta),
        "smooth_max_lambda": lambda impl: impl.smooth_max_lambda(counts, w, m, 0.5, float(np.sqrt(39)), beta),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--m", type=int, default=10_000, help="trajectories per batch")
    args = ap.parse_args(argv)

    if kernels.compiled is None:
        print("compiled extension not available; only the fallback is timed")
    print(f"chain(40, p=0.5), m={args.m}, best of {args.repeat}")
    print(f"{'kernel':20s} {'cython ms':>10s} {'python ms':>10s} {'speed-up':>9s}")
    for name, fn in cases(args.m).items():
        slow = min(timeit.repeat(lambda: fn(kernels.fallback), number=1, repeat=args.repeat)) * 1e3
        if kernels.compiled is None:
            print(f"{name:20s} {'-':>10s} {slow:10.2f} {'-':>9s}")
            continue
        fast = min(timeit.repeat(lambda: fn(kernels.compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:20s} {fast:10.2f} {slow:10.2f} {slow / fast:8.1f}x")


if __name__ == "__main__":
    main()
