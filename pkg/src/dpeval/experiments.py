"""Batch-size sweeps on the chain: RMSE and excess risk over repeated runs.

Seeding. Every (m, run) cell samples its trajectories from
``derive_seed(master_seed, "data", m, run)``, so all algorithms in a cell see
the same batch. Each private algorithm draws its noise from
``derive_seed(master_seed, algorithm, m, run)``. Adding or removing an
algorithm never shifts another row's randomness.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import rng as rngmod
from .errors import DpevalError
from .estimators import (
    EvalWeights,
    FeatureMap,
    empirical_risk_lambda,
    empirical_risk_w,
    feature_norms,
    solve_lsl,
    solve_lsw,
)
from .mdp import build_chain, exact_values, point_start, sample_flat, visit_probabilities
from .mechanisms import dp_lsl, dp_lsw, parse_sections
from .returns import summary_from_flat
from .sensitivity import CONSERVATIVE, MAIN

ALGORITHMS = ("lsw", "dp-lsw", "lsl", "dp-lsl")
CSV_HEADER = ("algorithm", "m", "lambda", "run", "seed", "rmse", "excess_risk", "sigma", "wall_ms", "error")
SUMMARY_RUNS = ("mean", "se")


@dataclass(frozen=True)
class ExperimentConfig:
    n_states: int = 40
    stay_prob: float = 0.5
    gamma: float = 0.99
    r_max: float = 1.0
    # the chain pays a single unit reward, so no return exceeds 1
    f_max: Optional[float] = 1.0
    epsilon: float = 0.1
    delta: float = 0.1
    algorithms: tuple = ALGORITHMS
    m_values: tuple = (100, 1000, 10_000, 100_000)
    lambda_rule: str = "sqrt"
    lambda_scale: float = 1.0
    w_rule: str = "ones"
    rho_rule: str = "ones"
    aggregation: int = 1
    start: str = "uniform"
    runs: int = 20
    master_seed: int = 0
    constants: str = MAIN
    threads: int = 1
    timing: bool = False
    gnuplot: bool = False
    output_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.m_values or any(a >= b for a, b in zip(self.m_values, self.m_values[1:])):
            raise ValueError("m_values must be non-empty and strictly increasing")
        if self.m_values[0] < 1:
            raise ValueError("m_values must be positive")
        if self.aggregation < 1:
            raise ValueError("aggregation group size must be at least 1")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad or not self.algorithms:
            raise ValueError(f"unknown algorithms {sorted(bad)}; choose from {ALGORITHMS}")
        if self.lambda_rule not in ("constant", "sqrt", "linear"):
            raise ValueError(f"unknown lambda_rule {self.lambda_rule!r}")
        if self.w_rule not in ("ones", "true_visit"):
            raise ValueError(f"unknown w_rule {self.w_rule!r}")
        if self.rho_rule != "ones":
            raise ValueError(f"unknown rho_rule {self.rho_rule!r}")
        if self.start not in ("uniform", "point"):
            raise ValueError(f"unknown start {self.start!r}")
        if self.constants not in (MAIN, CONSERVATIVE):
            raise ValueError(f"unknown constants {self.constants!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def lam(self, m: int) -> float:
        c = self.lambda_scale
        if self.lambda_rule == "constant":
            return float(c)
        if self.lambda_rule == "sqrt":
            return c * math.sqrt(m)
        return c * float(m)


@dataclass(frozen=True)
class ResultRow:
    """One CSV line. Per-run rows have an integer ``run``; summary rows use "mean" / "se"."""

    algorithm: str
    m: int
    lam: Optional[float]
    run: object
    seed: Optional[int]
    rmse: Optional[float]
    excess_risk: Optional[float]
    sigma: Optional[float]
    wall_ms: Optional[float] = None
    error: str = ""

    def sort_key(self):
        r = self.run
        return (self.algorithm, self.m, 0 if isinstance(r, int) else 1,
                r if isinstance(r, int) else SUMMARY_RUNS.index(r))


def _r12(x):
    return None if x is None else float(f"{x:.12g}")


def aggregate_features(n_transient: int, group: int, pad_rows: int = 0) -> FeatureMap:
    """Indicator features grouping ``group`` adjacent states per column.

    The last column is short when ``group`` does not divide ``n_transient``.
    ``pad_rows`` appends all-zero rows (for absorbing states).
    """
    if group < 1:
        raise ValueError("group must be at least 1")
    d = -(-n_transient // group)
    phi = np.zeros((n_transient + pad_rows, d))
    phi[np.arange(n_transient), np.arange(n_transient) // group] = 1.0
    return FeatureMap(phi)


def rmse(theta, features: FeatureMap, exact, states=None) -> float:
    """Root mean squared error of ``Phi theta`` against ``exact``, over ``states`` (default all)."""
    err = features.phi @ np.asarray(theta) - np.asarray(exact)
    if states is not None:
        err = err[np.asarray(states)]
    return float(np.sqrt(np.mean(err * err)))


@dataclass
class _Setup:
    mdp: object
    exact: np.ndarray
    transient: np.ndarray
    features: FeatureMap
    w: EvalWeights
    rho: EvalWeights
    w_norms: object = None
    rho_norms: object = None


def _setup(cfg: ExperimentConfig) -> _Setup:
    N = cfg.n_states
    start = None if cfg.start == "uniform" else point_start(N, 0)
    mdp = build_chain(N, cfg.stay_prob, cfg.gamma, start)
    mdp = replace_rmax(mdp, cfg.r_max)
    transient = mdp.transient
    features = aggregate_features(len(transient), cfg.aggregation, pad_rows=N - len(transient))
    rho_vals = (mdp.absorbing_mask == 0).astype(float)
    if cfg.w_rule == "ones":
        w_vals = rho_vals.copy()
    else:
        w_vals = rho_vals * visit_probabilities(mdp).p
    w, rho = EvalWeights.fixed(w_vals), EvalWeights.rho(rho_vals)
    return _Setup(mdp, exact_values(mdp), transient, features, w, rho,
                  feature_norms(features, w), feature_norms(features, rho))


def replace_rmax(mdp, r_max):
    if r_max == mdp.r_max:
        return mdp
    if r_max < float(mdp.rewards.max()):
        raise ValueError("r_max is below the largest reward")
    return type(mdp)(mdp.transitions, mdp.rewards, mdp.gamma, r_max, mdp.absorbing, mdp.start_dist)


def _cell(cfg: ExperimentConfig, st: _Setup, m: int, run: int) -> list:
    """Every configured algorithm on one (m, run) batch."""
    rows = []
    data_seed = rngmod.derive_seed(cfg.master_seed, "data", m, run)
    try:
        t0 = time.perf_counter()
        states, rewards, offsets = sample_flat(st.mdp, m, rngmod.make_rng(data_seed))
        summary = summary_from_flat(states, rewards, offsets, cfg.gamma, cfg.n_states)
    except Exception as exc:  # recorded, the sweep goes on
        msg = _err(exc)
        return [ResultRow(a, m, cfg.lam(m) if "lsl" in a else None, run, data_seed, None, None, None, None, msg)
                for a in cfg.algorithms]
    lam = cfg.lam(m)
    for alg in cfg.algorithms:
        t1 = time.perf_counter()
        is_lsl = alg.endswith("lsl")
        private = alg.startswith("dp-")
        seed = rngmod.derive_seed(cfg.master_seed, alg, m, run) if private else data_seed
        try:
            if is_lsl:
                if private:
                    est = dp_lsl(summary, st.features, st.rho, lam, cfg.gamma, cfg.r_max, cfg.epsilon, cfg.delta,
                                 rngmod.make_rng(seed), cfg.f_max, cfg.constants, st.rho_norms)
                    theta, theta_hat, sigma = est.theta, est.theta_hat, est.sigma
                else:
                    theta = theta_hat = solve_lsl(summary, st.features, st.rho, lam)
                    sigma = None
                risk = lambda t: float(empirical_risk_lambda(t, summary, st.features, st.rho, lam))
            else:
                if private:
                    est = dp_lsw(summary, st.features, st.w, cfg.gamma, cfg.r_max, cfg.epsilon, cfg.delta,
                                 rngmod.make_rng(seed), cfg.f_max, cfg.constants, st.w_norms)
                    theta, theta_hat, sigma = est.theta, est.theta_hat, est.sigma
                else:
                    theta = theta_hat = solve_lsw(summary, st.features, st.w)
                    sigma = None
                risk = lambda t: float(empirical_risk_w(t, summary, st.features, st.w))
            excess = risk(theta_hat) - risk(theta) if private else 0.0
            err = rmse(theta_hat, st.features, st.exact, st.transient)
            msg = ""
        except (DpevalError, ValueError, np.linalg.LinAlgError) as exc:
            err = excess = sigma = None
            msg = _err(exc)
        wall = None
        if cfg.timing:
            # the shared sampling time is charged to every algorithm in the cell
            wall = (time.perf_counter() - t1 + (t1 - t0)) * 1e3
        rows.append(ResultRow(alg, m, lam if is_lsl else None, run, seed, err, excess, sigma, wall, msg))
    return rows


def _err(exc) -> str:
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _summaries(rows: list) -> list:
    by_key: dict = {}
    for r in rows:
        by_key.setdefault((r.algorithm, r.m, r.lam), []).append(r)
    out = []
    for (alg, m, lam), group in by_key.items():
        mean_vals, se_vals = {}, {}
        for name in ("rmse", "excess_risk", "sigma"):
            xs = np.array([getattr(r, name) for r in group if getattr(r, name) is not None], dtype=float)
            mean_vals[name] = float(xs.mean()) if xs.size else None
            se_vals[name] = float(xs.std(ddof=1) / math.sqrt(xs.size)) if xs.size > 1 else None
        n_err = sum(1 for r in group if r.error)
        note = f"{n_err} failed runs" if n_err else ""
        out.append(ResultRow(alg, m, lam, "mean", None, mean_vals["rmse"], mean_vals["excess_risk"],
                             mean_vals["sigma"], None, note))
        out.append(ResultRow(alg, m, lam, "se", None, se_vals["rmse"], se_vals["excess_risk"],
                             se_vals["sigma"], None, note))
    return out


def thread_count(cfg: ExperimentConfig) -> int:
    """Worker threads: ``DPEVAL_THREADS`` when set, else the config value."""
    env = os.environ.get("DPEVAL_THREADS")
    return max(1, int(env)) if env else cfg.threads


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list:
    """Run the sweep; returns per-run and summary rows and writes ``results.csv``.

    Rows are sorted by (algorithm, m, run) with summaries after each group,
    and floats are rounded to what the CSV holds, so the returned rows equal
    the parsed file.
    """
    st = _setup(cfg)
    cells = [(m, run) for m in cfg.m_values for run in range(cfg.runs)]
    n_threads = thread_count(cfg)
    if n_threads == 1:
        results = [_cell(cfg, st, m, run) for m, run in cells]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda c: _cell(cfg, st, *c), cells))
    rows = [r for cell in results for r in cell]
    rows += _summaries(rows)
    rows = [_rounded(r) for r in sorted(rows, key=ResultRow.sort_key)]
    if write:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(rows, out / "results.csv")
        if cfg.gnuplot:
            write_gnuplot(out / "plot.gp", "results.csv", cfg)
    return rows


def _rounded(r: ResultRow) -> ResultRow:
    return replace(r, lam=_r12(r.lam), rmse=_r12(r.rmse), excess_risk=_r12(r.excess_risk),
                   sigma=_r12(r.sigma), wall_ms=_r12(r.wall_ms))


# -- CSV ---------------------------------------------------------------------


def _cell_text(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def format_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_cell_text(v) for v in (r.algorithm, r.m, r.lam, r.run, r.seed, r.rmse,
                                             r.excess_risk, r.sigma, r.wall_ms, r.error)])
    return buf.getvalue()


def emit_csv(rows, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(rows))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def parse_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    opt_f = lambda s: float(s) if s != "" else None
    rows = []
    for rec in reader:
        alg, m, lam, run, seed, rm, ex, sg, wall, err = rec
        rows.append(ResultRow(alg, int(m), opt_f(lam), int(run) if run.isdigit() else run,
                              int(seed) if seed else None, opt_f(rm), opt_f(ex), opt_f(sg), opt_f(wall), err))
    return rows


def read_csv(path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read())


def write_gnuplot(path, csv_name: str, cfg: ExperimentConfig) -> None:
    """Log-log plot of mean RMSE against m, one curve per algorithm."""
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'm'",
        "set ylabel 'mean RMSE'",
        "set key left bottom",
        "plot \\",
    ]
    parts = []
    for alg in cfg.algorithms:
        parts.append(
            f"  '{csv_name}' using (strcol(1) eq '{alg}' && strcol(4) eq 'mean' ? $2 : 1/0):6 "
            f"with linespoints title '{alg}'"
        )
    lines.append(", \\\n".join(parts))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- config files ------------------------------------------------------------


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Build a config from ``key = value`` lines, optionally under ``[experiment]``.

    Keys are :class:`ExperimentConfig` field names; lists are bracketed.
    """
    sections = parse_sections(text)
    values = dict(sections.get(None, {}))
    values.update(sections.get("experiment", {}))
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "f_max" in values and values["f_max"] in ("none", "None", "null"):
        values["f_max"] = None
    for key in ("algorithms", "m_values"):
        if key in values and not isinstance(values[key], (list, tuple)):
            values[key] = [values[key]]
    if "algorithms" in values:
        values["algorithms"] = [str(a) for a in values["algorithms"]]
    for key in ("n_states", "aggregation", "runs", "master_seed", "threads"):
        if key in values:
            values[key] = int(values[key])
    for key in ("timing", "gnuplot"):
        if key in values and isinstance(values[key], str):
            values[key] = values[key].lower() in ("1", "true", "yes")
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def format_config(cfg: ExperimentConfig) -> str:
    lines = ["[experiment]"]
    for k, v in asdict(cfg).items():
        if v is None:
            v = "none"
        elif isinstance(v, (tuple, list)):
            v = json.dumps(list(v))
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
