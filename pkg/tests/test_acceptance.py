"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with ``python3 tests/test_acceptance.py`` for
just the nine summary lines.
"""
import functools
import math
import os
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from dpeval import oracle
from dpeval import rng as rngmod
from dpeval.estimators import EvalWeights, FeatureMap
from dpeval.experiments import ExperimentConfig, format_config, run_experiment
from dpeval.mdp import build_chain, sample_dataset, sample_flat
from dpeval.mechanisms import dp_lsl, dp_lsw
from dpeval.returns import summary_from_flat
from dpeval.sensitivity import phi_lambda, phi_w, privacy_constants, smooth_bound_lambda, smooth_bound_w

EPS = DELTA = 0.1


def _line(n, ok, detail):
    return f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"


# -- 1, 2: exhaustive neighbour pool on the 3-state chain ---------------------


@functools.lru_cache(maxsize=None)
def _calibration():
    alts = oracle.enumerate_trajectories([0, 1], 3)
    feats = FeatureMap.identity(3)
    budget = privacy_constants(EPS, DELTA, 3)
    ones = np.ones(3)
    out = {}
    for solver in (oracle.LswSolver(EvalWeights.fixed(ones)), oracle.LslSolver(EvalWeights.rho(ones), 2.0)):
        t = time.perf_counter()
        rep = oracle.certify_calibration(alts, 3, feats, solver, 0.5, 1.0, budget)
        out[rep.mechanism] = (rep, time.perf_counter() - t)
    return out


def criterion_1():
    res = _calibration()
    ok = all(rep.violations_a == 0 and rep.violations_b == 0 and secs < 60 for rep, secs in res.values())
    detail = "; ".join(
        f"{k}: {rep.n_pairs} pairs, max alpha|dtheta|/sigma={rep.worst_a:.4f}, "
        f"max log-variance gap - beta={rep.worst_log_gap - rep.beta:.3g} (beta={rep.beta:.4g}), {secs:.1f}s"
        for k, (rep, secs) in res.items()
    )
    return ok, detail


def criterion_2():
    res = _calibration()
    ok = all(rep.violations_bound == 0 for rep, _ in res.values())
    detail = "; ".join(f"{k}: max |dtheta|/bound={rep.worst_bound:.4f}, "
                       f"{rep.violations_bound} violations" for k, (rep, _) in res.items())
    return ok, detail


# -- 3: smoothness --------------------------------------------------------------


def criterion_3():
    budget = privacy_constants(EPS, DELTA, 40)
    pairs = oracle.random_adjacent_signatures(1000, 40, 1000, rngmod.make_rng(2024))
    w = EvalWeights.fixed(np.ones(40))
    rho = EvalWeights.rho(np.ones(40))
    fams = {
        "w": lambda v: (smooth_bound_w(v, w, budget).psi, phi_w(v, w, 0)),
        "lambda": lambda v: (smooth_bound_lambda(v, rho, 2.0, 1.0, budget).psi, phi_lambda(v, rho, 0, 2.0, 1.0)),
    }
    reps = {k: oracle.check_smoothness(f, pairs, budget, strict=False) for k, f in fams.items()}
    ok = all(r.ok for r in reps.values())
    detail = "; ".join(f"{k}: {r.n_pairs} pairs, max |dln psi|-beta={r.max_log_gap - r.beta:.3g}, "
                       f"min psi/phi0={r.min_psi_over_phi0:.6g}" for k, r in reps.items())
    return ok, detail + f" (beta={budget.beta:.6g}, float slack {oracle.SMOOTH_LOG_SLACK:g})"


# -- 4: noise expectation identities ------------------------------------------


def criterion_4():
    mdp = build_chain(40, 0.5, 0.99)
    m = 1000
    summary = summary_from_flat(*sample_flat(mdp, m, rngmod.make_rng(7)), 0.99, 40)
    feats = FeatureMap(np.vstack([np.eye(39), np.zeros((1, 39))]))
    weights = np.append(np.ones(39), 0.0)
    lam = math.sqrt(m)
    results = {}
    for mech in ("lsw", "lsl"):
        t = time.perf_counter()
        if mech == "lsw":
            wts = EvalWeights.fixed(weights)
            sigma = dp_lsw(summary, feats, wts, 0.99, 1.0, EPS, DELTA, rngmod.make_rng(0), f_max=1.0).sigma
            res = oracle.noise_expectation_identity("lsw", summary, feats, wts, sigma, 100_000, rngmod.make_rng(1))
        else:
            wts = EvalWeights.rho(weights)
            sigma = dp_lsl(summary, feats, wts, lam, 0.99, 1.0, EPS, DELTA, rngmod.make_rng(0), f_max=1.0).sigma
            res = oracle.noise_expectation_identity("lsl", summary, feats, wts, sigma, 100_000, rngmod.make_rng(2),
                                                    lam=lam)
        results[mech] = (res, time.perf_counter() - t)
    ok = all(res.z_score <= 5 and secs < 30 for res, secs in results.values())
    detail = "; ".join(f"{k}: mean {r.empirical_mean:.6g} vs {r.analytic:.6g} ({r.z_score:.2f} SE), {s:.1f}s"
                       for k, (r, s) in results.items())
    return ok, detail


# -- 5, 6: chain sweep ------------------------------------------------------------


SWEEP_M = (1000, 10_000, 100_000)


@functools.lru_cache(maxsize=None)
def _sweep():
    cfg = ExperimentConfig(m_values=SWEEP_M, runs=20, f_max=1.0, master_seed=0)
    rows = run_experiment(cfg, write=False)
    return {(r.algorithm, r.m): r for r in rows if r.run == "mean"}


def criterion_5():
    means = _sweep()
    ex = np.array([means[("dp-lsw", m)].excess_risk for m in SWEEP_M])
    slope = float(np.polyfit(np.log(SWEEP_M), np.log(ex), 1)[0])
    ok = -2.4 <= slope <= -1.6
    return ok, f"slope {slope:.3f} (target [-2.4, -1.6]); mean excess risk {', '.join(f'{x:.4g}' for x in ex)}"


def criterion_6():
    means = _sweep()
    parts, ok = [], True
    for priv, base in (("dp-lsw", "lsw"), ("dp-lsl", "lsl")):
        gap = {m: means[(priv, m)].rmse - means[(base, m)].rmse for m in (SWEEP_M[0], SWEEP_M[-1])}
        ratio = gap[SWEEP_M[0]] / gap[SWEEP_M[-1]]
        ok &= ratio >= 10
        parts.append(f"{priv}: gap {gap[SWEEP_M[0]]:.4g} -> {gap[SWEEP_M[-1]]:.4g}, ratio {ratio:.2f} (need >= 10)")
    return ok, "; ".join(parts)


# -- 7: technical lemmas ------------------------------------------------------


def criterion_7():
    checks = [oracle.binomial_lemma_check(m, p / 10) for m in range(1, 31) for p in range(1, 10)]
    binom_ok = all(c.ok for c in checks)
    worst = max(c.inverse_residual for c in checks)
    ml = oracle.max_lemma_check(rtol=1e-6)
    ok = binom_ok and ml.ok(which="stated")
    detail = (f"binomial {'ok' if binom_ok else 'FAILED'} (max residual {worst:.2g}); "
              f"max lemmas as stated: {ml.stated_failures}/{ml.n_points} grid points off, "
              f"max rel err {ml.stated_max_rel_err:.3g}; corrected end-point forms max rel err "
              f"{ml.corrected_max_rel_err:.2g}")
    return ok, detail


# -- 8: byte-identical CSV ----------------------------------------------------


def _dpeval_run(cfg_path, out_dir, threads):
    env = dict(os.environ, DPEVAL_THREADS=str(threads))
    exe = shutil.which("dpeval")
    prog = [exe] if exe else [sys.executable, "-m", "dpeval.cli"]
    cmd = prog + ["run", "--config", str(cfg_path), "--output-dir", str(out_dir)]
    subprocess.run(cmd, env=env, check=True, capture_output=True)
    return (Path(out_dir) / "results.csv").read_bytes()


def criterion_8(tmp_dir):
    tmp_dir = Path(tmp_dir)
    cfg = ExperimentConfig(m_values=(100, 1000, 10_000), runs=5, master_seed=17)
    cfg_path = tmp_dir / "sweep.cfg"
    cfg_path.write_text(format_config(cfg))
    a = _dpeval_run(cfg_path, tmp_dir / "a", 1)
    b = _dpeval_run(cfg_path, tmp_dir / "b", 1)
    c = _dpeval_run(cfg_path, tmp_dir / "c", 8)
    ok = a == b == c
    return ok, f"{len(a)} bytes; repeat identical: {a == b}; 1 vs 8 threads identical: {a == c}"


# -- 9: timing -----------------------------------------------------------------


def criterion_9():
    mdp = build_chain(40, 0.5, 0.99)
    data = sample_dataset(mdp, 10_000, rngmod.make_rng(3))
    feats = FeatureMap(np.vstack([np.eye(39), np.zeros((1, 39))]))
    w = EvalWeights.fixed(np.append(np.ones(39), 0.0))
    slowest = 0.0
    for seed in range(3):
        t = time.perf_counter()
        est = dp_lsw(data, feats, w, 0.99, 1.0, EPS, DELTA, rngmod.make_rng(seed), f_max=1.0)
        slowest = max(slowest, time.perf_counter() - t)
    ok = slowest < 1.0
    return ok, (f"slowest of 3 full dp_lsw calls on 10^4 trajectories: {slowest * 1e3:.1f} ms "
                f"(K_X={est.report.k_range}, N=40)")


def _run(n, fn, *args):
    ok, detail = fn(*args)
    print(_line(n, ok, detail))
    return ok


# -- pytest entry points ------------------------------------------------------


def _check(capsys, n, fn, *args):
    ok, detail = fn(*args)
    with capsys.disabled():
        print("\n" + _line(n, ok, detail))
    assert ok, detail


def test_criterion_1_calibration(capsys):
    _check(capsys, 1, criterion_1)


def test_criterion_2_sensitivity_bounds(capsys):
    _check(capsys, 2, criterion_2)


def test_criterion_3_smoothness(capsys):
    _check(capsys, 3, criterion_3)


def test_criterion_4_noise_identity(capsys):
    _check(capsys, 4, criterion_4)


@pytest.mark.slow
def test_criterion_5_excess_risk_slope(capsys):
    _check(capsys, 5, criterion_5)


@pytest.mark.slow
def test_criterion_6_private_converges(capsys):
    _check(capsys, 6, criterion_6)


def test_criterion_7_lemma_self_tests(capsys):
    _check(capsys, 7, criterion_7)


def test_criterion_8_determinism(capsys, tmp_path):
    _check(capsys, 8, criterion_8, tmp_path)


def test_criterion_9_performance(capsys):
    _check(capsys, 9, criterion_9)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [
            _run(1, criterion_1), _run(2, criterion_2), _run(3, criterion_3), _run(4, criterion_4),
            _run(5, criterion_5), _run(6, criterion_6), _run(7, criterion_7), _run(8, criterion_8, tmp),
            _run(9, criterion_9),
        ]
    print(f"{sum(results)}/{len(results)} criteria pass")
    sys.exit(0 if all(results) else 1)
