"""Command line entry point: ``dpeval run | verify | exact | release``."""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import oracle
from . import rng as rngmod
from .estimators import EvalWeights, FeatureMap, feature_norms
from .experiments import aggregate_features, load_config, run_experiment
from .mdp import build_chain, exact_values, point_start, visit_probabilities
from .mechanisms import dp_lsl, dp_lsw, format_estimate
from .returns import aggregate, read_trajectories
from .sensitivity import (
    CONSERVATIVE,
    MAIN,
    phi_lambda,
    phi_w,
    privacy_constants,
    smooth_bound_lambda,
    smooth_bound_w,
)


def _constants(args) -> str:
    return CONSERVATIVE if args.conservative_constants else MAIN


def cmd_run(args) -> int:
    overrides = {"output_dir": args.output_dir}
    if args.conservative_constants:
        overrides["constants"] = CONSERVATIVE
    cfg = load_config(args.config, **overrides)
    rows = run_experiment(cfg)
    n_err = sum(1 for r in rows if r.error and isinstance(r.run, int))
    print(f"wrote {len(rows)} rows to {cfg.output_dir}/results.csv ({n_err} failed runs)")
    return 0


def cmd_exact(args) -> int:
    start = point_start(args.n, 0) if args.start == "point" else None
    V = exact_values(build_chain(args.n, args.p, args.gamma, start))
    for s, v in enumerate(V):
        print(f"{s} {float(v)!r}")
    return 0


def cmd_release(args) -> int:
    data = read_trajectories(args.replay)
    n = args.n_states
    if args.group:
        features = aggregate_features(n - 1, args.group, pad_rows=1)
        weights = np.append(np.ones(n - 1), 0.0)
    else:
        features = FeatureMap.identity(n)
        weights = np.ones(n)
    rng = rngmod.make_rng(args.seed)
    summary = aggregate(data, args.gamma, n)
    if args.mechanism == "lsw":
        est = dp_lsw(summary, features, EvalWeights.fixed(weights), args.gamma, args.r_max, args.epsilon,
                     args.delta, rng, args.f_max, _constants(args))
    else:
        if args.lam is None:
            print("error: --lam is required for lsl", file=sys.stderr)
            return 2
        est = dp_lsl(summary, features, EvalWeights.rho(weights), args.lam, args.gamma, args.r_max,
                     args.epsilon, args.delta, rng, args.f_max, _constants(args))
    text = format_estimate(est, include_private=args.unsafe_diagnostics)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _line(name, ok, detail, informational=False):
    tag = "PASS" if ok else ("MISMATCH" if informational else "FAIL")
    print(f"{tag:8s} {name}: {detail}")


def cmd_verify(args) -> int:
    """Oracle suite on small instances; exit status 1 if any required check fails."""
    failed = 0
    constants = _constants(args)
    rng = rngmod.make_rng(args.seed)

    alts = oracle.enumerate_trajectories([0, 1], 3)
    if args.pool_size is not None and args.pool_size < len(alts):
        keep = np.sort(rng.choice(len(alts), size=args.pool_size, replace=False))
        alts = [alts[i] for i in keep]
    feats = FeatureMap.identity(3)
    ones = np.ones(3)
    budget = privacy_constants(args.epsilon, 0.1, 3, constants)
    for solver in (oracle.LswSolver(EvalWeights.fixed(ones)), oracle.LslSolver(EvalWeights.rho(ones), 2.0)):
        t = time.perf_counter()
        rep = oracle.certify_calibration(alts, 3, feats, solver, 0.5, 1.0, budget)
        ok = rep.ok
        failed += not ok
        _line(f"calibration[{rep.mechanism}]", ok,
              f"{rep.n_pairs} pairs, max alpha*dtheta/sigma={rep.worst_a:.4g}, "
              f"max log gap={rep.worst_log_gap:.6g} (beta={rep.beta:.6g}), "
              f"max dtheta/bound={rep.worst_bound:.4g}, {time.perf_counter() - t:.1f}s")

    b40 = privacy_constants(args.epsilon, 0.1, 40, constants)
    pairs = oracle.random_adjacent_signatures(1000, 40, 1000, rng)
    w = EvalWeights.fixed(np.ones(40))
    rho = EvalWeights.rho(np.ones(40))
    fam_w = lambda v: (smooth_bound_w(v, w, b40).psi, phi_w(v, w, 0))
    fam_l = lambda v: (smooth_bound_lambda(v, rho, 2.0, 1.0, b40).psi, phi_lambda(v, rho, 0, 2.0, 1.0))
    for name, fam in (("w", fam_w), ("lambda", fam_l)):
        rep = oracle.check_smoothness(fam, pairs, b40, strict=False)
        failed += not rep.ok
        _line(f"smoothness[{name}]", rep.ok,
              f"{rep.n_pairs} pairs, max log gap={rep.max_log_gap:.6g} (beta={rep.beta:.6g})")

    checks = [oracle.binomial_lemma_check(m, p / 10) for m in range(1, 31) for p in range(1, 10)]
    worst = max(c.inverse_residual for c in checks)
    bad = [c for c in checks if not c.ok]
    failed += bool(bad)
    _line("binomial lemma", not bad, f"max residual {worst:.3g}, {len(bad)} failing (m, p)")

    ml = oracle.max_lemma_check()
    failed += not ml.ok(which="corrected")
    _line("max lemmas (corrected forms)", ml.ok(which="corrected"), f"max rel err {ml.corrected_max_rel_err:.3g}")
    _line("max lemmas (stated forms)", ml.ok(which="stated"),
          f"{ml.stated_failures}/{ml.n_points} grid points disagree with brute force", informational=True)

    mdp = build_chain(4, 0.5, 0.9)
    vs = visit_probabilities(mdp)
    f4 = aggregate_features(3, 1, pad_rows=1)
    r4 = EvalWeights.rho(np.array([1.0, 1.0, 1.0, 0.0]))
    b4 = privacy_constants(args.epsilon, 0.1, 3, constants)
    if b4.beta < 0.5:
        main = oracle.utility_bound_lsl(vs, r4, f4, 50, 5.0, b4, 1.0)
        scratch = oracle.utility_bound_lsl_scratch(vs.p, vs.p_pair, vs.p_excl, r4.values, f4.phi, 50, 5.0,
                                                   b4.alpha, b4.beta, 1.0)
        ok = abs(main - scratch) <= 1e-10 * abs(scratch)
        failed += not ok
        _line("ridge utility bound, two codings", ok, f"{main!r} vs {scratch!r}")
        nrm = feature_norms(f4, EvalWeights.fixed(r4.values))
        main = oracle.utility_bound_lsw(vs, EvalWeights.fixed(r4.values), 50, b4, 1.0, nrm.pinv_norm, nrm.frob_norm)
        scratch = oracle.utility_bound_lsw_scratch(vs.p, r4.values, 50, b4.alpha, b4.beta, 1.0,
                                                   nrm.pinv_norm, nrm.frob_norm)
        ok = abs(main - scratch) <= 1e-10 * abs(scratch)
        failed += not ok
        _line("fixed-weight utility bound, two codings", ok, f"{main!r} vs {scratch!r}")

    print(f"{'FAILED' if failed else 'OK'}: {failed} required check(s) failed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpeval", description=__doc__)
    ap.add_argument("--conservative-constants", action="store_true",
                    help="use the alternative (alpha, beta) pair with the elementary proof")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the brute-force oracle suite")
    p.add_argument("--pool-size", type=int, default=None, help="random subset of the 84-trajectory pool")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("exact", help="print exact chain values")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--p", type=float, default=0.5, help="probability of staying put")
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--start", choices=("uniform", "point"), default="uniform")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("release", help="private estimate from a trajectory file")
    p.add_argument("--replay", required=True, help="trajectory batch file")
    p.add_argument("--mechanism", choices=("lsw", "lsl"), required=True)
    p.add_argument("--n-states", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--r-max", type=float, default=1.0)
    p.add_argument("--f-max", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--group", type=int, default=None,
                   help="aggregate transient states in groups; the last state is then taken as absorbing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.add_argument("--unsafe-diagnostics", action="store_true",
                   help="also write data-dependent quantities (theta, sigma, psi); these are not private")
    p.set_defaults(func=cmd_release)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
