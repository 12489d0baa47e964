"""Brute-force checks for the calibration, sensitivity and utility claims.

Everything here is deliberately slow and literal: enumerations, normal
equations instead of SVDs, exact rational sums. Checks that fail raise
:class:`~dpeval.errors.OracleViolation` unless told to just report.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng as rngmod
from .errors import OracleViolation
from .estimators import EvalWeights, FeatureMap, empirical_risk_lambda, empirical_risk_w, feature_norms
from .estimators import solve_lsl, solve_lsw
from .mdp import Mdp, VisitStats, sample_flat
from .returns import (
    DatasetSummary,
    Signature,
    Trajectory,
    TrajectoryDataset,
    aggregate,
    first_visit_returns,
    neighbor_replace_last,
)
from .sensitivity import (
    PrivacyBudget,
    check_lambda,
    lsl_prefactor,
    lsw_prefactor,
    resolve_f_max,
    smooth_bound_lambda,
    smooth_bound_w,
)

# Adjacent smooth bounds can differ by exactly e^beta, so the log ratio is
# compared with a float allowance on top of beta.
SMOOTH_LOG_SLACK = 1e-12
BOUND_RTOL = 1e-9
MAX_POOL = 10_000


@dataclass(frozen=True)
class LswSolver:
    w: EvalWeights


@dataclass(frozen=True)
class LslSolver:
    rho: EvalWeights
    lam: float


@dataclass(frozen=True)
class NeighborPool:
    base: TrajectoryDataset
    alternatives: tuple

    def __post_init__(self):
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        if len(self.alternatives) > MAX_POOL:
            raise ValueError(f"pool of {len(self.alternatives)} alternatives exceeds {MAX_POOL}")

    def neighbors(self):
        for x in self.alternatives:
            yield neighbor_replace_last(self.base, x)


def enumerate_trajectories(states: Sequence[int], max_len: int, rewards: Sequence[float] = (0.0, 1.0)) -> list:
    """Every trajectory of length 1..max_len over ``states`` with per-step rewards from ``rewards``."""
    out = []
    for L in range(1, max_len + 1):
        for seq in itertools.product(states, repeat=L):
            for rew in itertools.product(rewards, repeat=L):
                out.append(Trajectory(tuple(seq), tuple(float(r) for r in rew)))
    return out


# -- sensitivity -------------------------------------------------------------


def _solve(summary, features, solver):
    if isinstance(solver, LswSolver):
        return solve_lsw(summary, features, solver.w)
    return solve_lsl(summary, features, solver.rho, solver.lam)


def sensitivity_bound(signature: Signature, features: FeatureMap, solver, f_max: float) -> float:
    """Right-hand side of the local sensitivity bound for a dataset with this signature."""
    v = signature.counts.astype(float)
    if isinstance(solver, LswSolver):
        w = solver.w.values
        pinv = feature_norms(features, solver.w).pinv_norm
        return f_max * pinv * math.sqrt(float(np.sum(w / np.maximum(v, 1.0) ** 2)))
    rho = solver.rho.values
    op = float(np.linalg.norm(features.phi, 2))
    rho_inf = float(rho.max())
    check_lambda(solver.lam, op, rho_inf)
    c = op * rho_inf / math.sqrt(2.0 * solver.lam)
    phi = (c * math.sqrt(float(np.sum(rho * v))) + float(np.linalg.norm(rho))) ** 2
    return 2.0 * f_max * op / (solver.lam - op * op * rho_inf) * math.sqrt(phi)


def local_sensitivity_oracle(pool: NeighborPool, solver, features: FeatureMap, gamma: float, r_max: float,
                             f_max: Optional[float] = None, strict: bool = True):
    """Largest parameter change over the pool, and the bound it must respect.

    Returns ``(observed_max, bound)``.
    """
    f_max = resolve_f_max(f_max, r_max, gamma)
    n = features.n_states
    base = aggregate(pool.base, gamma, n)
    theta = _solve(base, features, solver)
    observed = 0.0
    for x2 in pool.neighbors():
        theta2 = _solve(aggregate(x2, gamma, n), features, solver)
        observed = max(observed, float(np.linalg.norm(theta - theta2)))
    bound = sensitivity_bound(base.signature, features, solver, f_max)
    if strict and observed > bound * (1 + BOUND_RTOL):
        raise OracleViolation(f"observed sensitivity {observed!r} exceeds bound {bound!r}")
    return observed, bound


@dataclass
class CalibrationReport:
    """Worst cases over every ordered neighbour pair in an exhaustive pool.

    ``worst_a`` is max alpha |theta_X - theta_X'| / sigma_X (must be <= 1),
    ``worst_log_gap`` is max |ln sigma_X^2 - ln sigma_X'^2| (must be <= beta),
    ``worst_bound`` is max |theta_X - theta_X'| / bound_X (must be <= 1).
    """

    mechanism: str
    n_pairs: int = 0
    worst_a: float = 0.0
    worst_log_gap: float = 0.0
    worst_bound: float = 0.0
    beta: float = math.nan
    violations_a: int = 0
    violations_b: int = 0
    violations_bound: int = 0

    @property
    def ok(self) -> bool:
        return self.violations_a == 0 and self.violations_b == 0 and self.violations_bound == 0

    def assert_ok(self):
        if not self.ok:
            raise OracleViolation(f"calibration violated: {self}")


def _first_visit_table(alternatives, gamma, n):
    F = np.zeros((len(alternatives), n))
    V = np.zeros((len(alternatives), n), dtype=np.int64)
    for i, x in enumerate(alternatives):
        for s, f in first_visit_returns(x, gamma).items():
            F[i, s] = f
            V[i, s] = 1
    return F, V


def certify_calibration(alternatives: Sequence[Trajectory], m: int, features: FeatureMap, solver,
                        gamma: float, r_max: float, budget: PrivacyBudget,
                        f_max: Optional[float] = None) -> CalibrationReport:
    """Check both calibration conditions and the sensitivity bound exhaustively.

    Datasets are every multiset of ``m - 1`` pool trajectories followed by a
    pool trajectory; neighbours swap that last one for any other. Parameters
    come from the normal equations, noise scales from the mechanism code.
    """
    f_max = resolve_f_max(f_max, r_max, gamma)
    n, d = features.n_states, features.d
    phi = features.phi
    F, V = _first_visit_table(alternatives, gamma, n)
    n_alt = len(alternatives)
    is_lsw = isinstance(solver, LswSolver)
    weights = solver.w if is_lsw else solver.rho
    norms = feature_norms(features, weights)
    if is_lsw:
        wv = solver.w.values
        G = phi.T @ (wv[:, None] * phi)
        # theta = f_x @ proj for every completion at once
        proj = (wv[:, None] * phi) @ np.linalg.inv(G).T
        prefactor = lsw_prefactor(budget, f_max, norms.pinv_norm)
    else:
        rv = solver.rho.values
        prefactor = lsl_prefactor(budget, f_max, norms.op_norm, solver.rho.inf_norm, solver.lam)
        eye = np.eye(d) * solver.lam / (2.0 * m)

    psi_cache: dict = {}

    def sigma_for(counts_row):
        key = tuple(counts_row.tolist())
        if key not in psi_cache:
            sig = Signature(counts_row, m)
            if is_lsw:
                psi = smooth_bound_w(sig, solver.w, budget).psi
            else:
                psi = smooth_bound_lambda(sig, solver.rho, solver.lam, norms.op_norm, budget).psi
            bound = sensitivity_bound(sig, features, solver, f_max)
            psi_cache[key] = (prefactor * math.sqrt(psi), bound)
        return psi_cache[key]

    rep = CalibrationReport("lsw" if is_lsw else "lsl", beta=budget.beta)
    for prefix in itertools.combinations_with_replacement(range(n_alt), m - 1):
        sums = F[list(prefix)].sum(axis=0) + F
        counts = V[list(prefix)].sum(axis=0) + V
        f_x = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        if is_lsw:
            theta = f_x @ proj
        else:
            g = rv * counts / m
            A = np.einsum("sa,cs,sb->cab", phi, g, phi) + eye
            b = (g * f_x) @ phi
            theta = np.linalg.solve(A, b[..., None])[..., 0]
        sb = np.array([sigma_for(c) for c in counts])
        sigma, bound = sb[:, 0], sb[:, 1]
        diff = np.linalg.norm(theta[:, None, :] - theta[None, :, :], axis=-1)

        ratio_a = budget.alpha * diff / sigma[:, None]
        log_s2 = 2.0 * np.log(sigma)
        gap = np.abs(log_s2[:, None] - log_s2[None, :])
        ratio_c = diff / bound[:, None]

        rep.n_pairs += diff.size
        rep.worst_a = max(rep.worst_a, float(ratio_a.max()))
        rep.worst_log_gap = max(rep.worst_log_gap, float(gap.max()))
        rep.worst_bound = max(rep.worst_bound, float(ratio_c.max()))
        rep.violations_a += int(np.count_nonzero(ratio_a > 1.0 + BOUND_RTOL))
        rep.violations_b += int(np.count_nonzero(gap > budget.beta + SMOOTH_LOG_SLACK))
        rep.violations_bound += int(np.count_nonzero(ratio_c > 1.0 + BOUND_RTOL))
    return rep


# -- smoothness --------------------------------------------------------------


@dataclass
class SmoothnessReport:
    max_log_gap: float
    beta: float
    n_pairs: int
    min_psi_over_phi0: float

    @property
    def ok(self) -> bool:
        return self.max_log_gap <= self.beta + SMOOTH_LOG_SLACK and self.min_psi_over_phi0 >= 1.0


def check_smoothness(family, pairs, budget: PrivacyBudget, strict: bool = True) -> SmoothnessReport:
    """``family`` maps a :class:`Signature` to ``(psi, phi_at_k0)``; ``pairs`` are adjacent signatures."""
    worst = 0.0
    min_ratio = math.inf
    n = 0
    for v, v2 in pairs:
        if v.m != v2.m or v.counts.shape != v2.counts.shape:
            raise ValueError("signature pairs must share N and m")
        if np.max(np.abs(v.counts - v2.counts), initial=0) > 1:
            raise ValueError("signatures are not adjacent")
        psi1, phi1 = family(v)
        psi2, phi2 = family(v2)
        worst = max(worst, abs(math.log(psi1) - math.log(psi2)))
        min_ratio = min(min_ratio, psi1 / phi1, psi2 / phi2)
        n += 1
    rep = SmoothnessReport(worst, budget.beta, n, min_ratio)
    if strict and not rep.ok:
        raise OracleViolation(f"smoothness violated: {rep}")
    return rep


def random_adjacent_signatures(n_pairs: int, n_states: int, m_max: int, rng: np.random.Generator):
    """Random signature pairs at sup-distance at most 1, with extra mass on zero counts and on m."""
    pairs = []
    for _ in range(n_pairs):
        m = int(rng.integers(1, m_max + 1))
        kind = rng.integers(0, 4)
        if kind == 0:
            v = rng.integers(0, m + 1, n_states)
        elif kind == 1:
            v = rng.integers(0, min(m, 3) + 1, n_states)
        elif kind == 2:
            v = np.clip(rng.integers(m - 3, m + 1, n_states), 0, m)
        else:
            v = rng.integers(0, m + 1) * np.ones(n_states, dtype=np.int64)
        step = rng.integers(-1, 2, n_states)
        v2 = np.clip(v + step, 0, m)
        pairs.append((Signature(v, m), Signature(v2, m)))
    return pairs


# -- noise expectation -------------------------------------------------------


@dataclass(frozen=True)
class NoiseIdentityResult:
    empirical_mean: float
    standard_error: float
    analytic: float
    n_draws: int

    @property
    def z_score(self) -> float:
        if self.standard_error == 0:
            return 0.0 if self.empirical_mean == self.analytic else math.inf
        return abs(self.empirical_mean - self.analytic) / self.standard_error


def noise_expectation_identity(mechanism: str, summary: DatasetSummary, features: FeatureMap,
                               weights: EvalWeights, sigma: float, n_draws: int, rng: np.random.Generator,
                               lam: Optional[float] = None, chunk: int = 20_000) -> NoiseIdentityResult:
    """Monte Carlo mean of J(theta + eta) - J(theta) against its closed form.

    ``sigma`` is passed in so the mechanism's calibration and a forced zero
    noise can both be checked.
    """
    if n_draws < 2:
        raise ValueError("need at least 2 draws")
    d = features.d
    row_sq = np.sum(features.phi**2, axis=1)
    if mechanism == "lsw":
        theta = solve_lsw(summary, features, weights)
        base = empirical_risk_w(theta, summary, features, weights)
        analytic = sigma**2 * float(np.sum(weights.values * row_sq))
    elif mechanism == "lsl":
        if lam is None:
            raise ValueError("lsl needs lambda")
        theta = solve_lsl(summary, features, weights, lam)
        base = empirical_risk_lambda(theta, summary, features, weights, lam)
        m = summary.m
        analytic = (lam * d / (2.0 * m) + float(np.sum(weights.values * row_sq * summary.counts)) / m) * sigma**2
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        thetas = theta + sigma * rngmod.standard_normal(rng, (k, d))
        if mechanism == "lsw":
            ex = empirical_risk_w(thetas, summary, features, weights) - base
        else:
            ex = empirical_risk_lambda(thetas, summary, features, weights, lam) - base
        total += float(ex.sum())
        total_sq += float((ex * ex).sum())
        done += k
    mean = total / n_draws
    var = max(total_sq / n_draws - mean * mean, 0.0) * n_draws / (n_draws - 1)
    return NoiseIdentityResult(mean, math.sqrt(var / n_draws), analytic, n_draws)


# -- utility bounds ----------------------------------------------------------


def _check_visit(visit: VisitStats, n):
    if visit.p.shape != (n,):
        raise ValueError("visit statistics do not match the number of states")


def utility_bound_lsw(visit: VisitStats, w: EvalWeights, m: int, budget: PrivacyBudget, f_max: float,
                      pinv_norm: float, frob_norm: float, variant: str = "main") -> float:
    """Expected excess risk bound for the fixed-weight mechanism.

    ``variant="main"`` needs beta <= 1/2 and uses 6 (1/(p m)^2 + beta^2 (1 - beta p/2)^m);
    ``variant="tight"`` needs beta <= 2 and uses
    6/(p^2 (m+1)(m+2)) + e^2 beta^2/4 (1 - (1 - e^-beta) p)^m.
    """
    _check_visit(visit, w.values.shape[0])
    beta = budget.beta
    C2 = (budget.alpha * f_max * pinv_norm * frob_norm) ** 2
    p = visit.p
    zero = p == 0
    pz = np.where(zero, 1.0, p)
    if variant == "main":
        if beta > 0.5:
            raise ValueError("this bound needs beta <= 1/2")
        per = 6.0 * (1.0 / (pz * pz * m * m) + beta**2 * (1.0 - beta * pz / 2.0) ** m)
    elif variant == "tight":
        if beta > 2.0:
            raise ValueError("this bound needs beta <= 2")
        per = 6.0 / (pz * pz * (m + 1) * (m + 2)) + math.e**2 * beta**2 / 4.0 * (1.0 - (1.0 - math.exp(-beta)) * pz) ** m
    else:
        raise ValueError(f"unknown variant {variant!r}")
    per = np.where(zero, 1.0, per)
    return C2 * float(np.sum(w.values * per))


def utility_bound_lsw_scratch(p, w, m, alpha, beta, f_max, pinv_norm, frob_norm) -> float:
    """State-by-state loop version of the main-form bound."""
    C = alpha * f_max * pinv_norm * frob_norm
    total = 0.0
    for ps, ws in zip(p, w):
        if ps == 0:
            total += ws
        else:
            total += 6 * ws * (1 / (ps**2 * m**2) + beta**2 * (1 - beta * ps / 2) ** m)
    return C * C * total


def _lsl_constants(budget, f_max, features, rho, lam):
    op = float(np.linalg.norm(features.phi, 2))
    rho_inf = rho.inf_norm
    check_lambda(lam, op, rho_inf)
    C = 2.0 * budget.alpha * f_max * op / (lam - op * op * rho_inf)
    return C, op, rho_inf


def utility_bound_lsl(visit: VisitStats, rho: EvalWeights, features: FeatureMap, m: int, lam: float,
                      budget: PrivacyBudget, f_max: float) -> float:
    """Expected excess risk bound for the ridge mechanism, in five groups."""
    _check_visit(visit, features.n_states)
    beta = budget.beta
    if not beta < 0.5:
        raise ValueError("this bound needs beta < 1/2")
    C, op, rho_inf = _lsl_constants(budget, f_max, features, rho, lam)
    d = features.d
    r = rho.values
    r2 = rho.l2_norm**2
    nphi = np.sum(features.phi**2, axis=1)
    p, pp, pe = visit.p, visit.p_pair, visit.p_excl
    K = op * op * rho_inf * rho_inf
    eb = 2.0 * math.e * beta

    g1 = float(np.sum(r * p * (d * K / 2.0 + 2.0 * r2 * nphi)))
    g2 = lam / m * d * r2
    g3 = d * K / (4.0 * math.e * beta) / m * float(np.sum(r * (1.0 - p) ** m))
    g4 = m / lam * K * float(np.sum(r * p * nphi) * np.sum(r * p))
    off = ~np.eye(len(p), dtype=bool)
    cross = pp - np.outer(p, p) + pe * ((1.0 - p)[None, :] ** (m - 1)) / eb
    w_pair = np.outer(r * nphi, r)
    g5 = K / lam * (float(np.sum(r * r * nphi * (p - p * p))) + float(np.sum((w_pair * cross)[off])))
    return C * C * (g1 + g2 + g3 + g4 + g5)


def utility_bound_lsl_scratch(p, p_pair, p_excl, rho, phi, m, lam, alpha, beta, f_max) -> float:
    """The same bound from the un-grouped moment expansion, with explicit loops.

    Uses E|X_s| = m p, E|X_s|^2 = m^2 p^2 + m(p - p^2),
    E|X_s||X_t| = m(m-1) p_s p_t + m p_st and E|X_s| 1{X_t = 0} = m pbar_st (1 - p_t)^(m-1).
    """
    n, d = len(p), len(phi[0])
    op = float(np.linalg.norm(np.asarray(phi, dtype=float), 2))
    rinf = max(rho)
    C = 2 * alpha * f_max * op / (lam - op**2 * rinf)
    r2 = sum(x * x for x in rho)
    nphi = [sum(v * v for v in row) for row in phi]
    K = op**2 * rinf**2
    inv2eb = 1 / (2 * math.e * beta)
    total = lam * d * r2 / m
    total += d * K / (2 * m) * sum(rho[s] * (m * p[s] + inv2eb * (1 - p[s]) ** m) for s in range(n))
    total += 2 * r2 / m * sum(rho[s] * p[s] * nphi[s] * m for s in range(n))
    diag = sum(rho[s] ** 2 * nphi[s] * (m**2 * p[s] ** 2 + m * (p[s] - p[s] ** 2)) for s in range(n))
    total += K / (lam * m) * diag
    offd = 0.0
    for s in range(n):
        for t in range(n):
            if s == t:
                continue
            e_xx = m * (m - 1) * p[s] * p[t] + m * p_pair[s][t]
            e_x0 = m * p_excl[s][t] * (1 - p[t]) ** (m - 1)
            offd += rho[s] * rho[t] * nphi[s] * (e_xx + inv2eb * e_x0)
    total += K / (lam * m) * offd
    return C * C * total


def visit_stats_monte_carlo(mdp: Mdp, n: int, rng: np.random.Generator) -> VisitStats:
    """Empirical visit, co-visit and exclusion frequencies over ``n`` sampled trajectories."""
    states, _, offsets = sample_flat(mdp, n, rng)
    N = mdp.n_states
    ind = np.zeros((n, N))
    for i in range(n):
        ind[i, np.unique(states[offsets[i]:offsets[i + 1]])] = 1.0
    p = ind.mean(axis=0)
    pp = ind.T @ ind / n
    pe = ind.T @ (1.0 - ind) / n
    return VisitStats(p, pp, pe)


# -- technical lemmas --------------------------------------------------------


@dataclass(frozen=True)
class BinomialCheck:
    m: int
    p: float
    inverse_residual: float
    inverse_sq_enumerated: Fraction
    inverse_sq_bound: Fraction

    @property
    def ok(self) -> bool:
        return self.inverse_residual <= 1e-12 and self.inverse_sq_enumerated <= self.inverse_sq_bound


def binomial_lemma_check(m: int, p: float) -> BinomialCheck:
    """Exact rational enumeration of E[1/(B+1)] and E[1{B>=1}/B^2] for B ~ Bin(m, p).

    ``p`` is taken at its exact binary value. The closed form for the first
    expectation is evaluated in floats; the second is compared exactly.
    """
    if not 1 <= m <= 30:
        raise ValueError("m must lie in 1..30")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    P = Fraction(p)
    Q = 1 - P
    pmf = [math.comb(m, k) * P**k * Q ** (m - k) for k in range(m + 1)]
    e_inv = sum(pk / (k + 1) for k, pk in enumerate(pmf))
    e_inv_sq = sum(pk / (k * k) for k, pk in enumerate(pmf) if k >= 1)
    q = 1.0 - p
    closed = (1.0 - q ** (m + 1)) / (p * (m + 1))
    # the bound is attained at m = 1, so it is compared in exact arithmetic too
    bound = 6 / (P * (m + 1)) * ((1 - Q ** (m + 2)) / (P * (m + 2)) - Q ** (m + 1) - P * (m + 1) / 2 * Q**m)
    return BinomialCheck(m, p, abs(float(e_inv) - closed), e_inv_sq, bound)


def max_lemma_inverse_sq_stated(a: float, b: float) -> float:
    """Piecewise form as stated for max over [0, a-1] of e^{-bx} / (a-x)^2."""
    if b < 2.0 / a:
        return 1.0 / (a * a)
    if b > 2.0:
        return math.exp(1.0 - a * b)
    return math.e**2 / 4.0 * b * b * math.exp(-a * b)


def max_lemma_inverse_sq(a: float, b: float) -> float:
    """max over [0, a-1] of e^{-bx} / (a-x)^2.

    The log of the objective is convex in x, so the maximum sits at an end point.
    """
    return max(1.0 / (a * a), math.exp(-b * (a - 1.0)))


def max_lemma_linear_stated(a: float, b: float, m: float) -> float:
    """Piecewise form as stated for max over [0, m-a] of e^{-2bx} (a+x)."""
    if b < a / 2.0:
        return a
    if b > m / 2.0:
        return m * math.exp(-2.0 * b * (m - a))
    return math.exp(2.0 * a * b) / (2.0 * math.e * b)


def max_lemma_linear(a: float, b: float, m: float) -> float:
    """max over [0, m-a] of e^{-2bx} (a+x); log-concave with stationary point 1/(2b) - a."""
    if 2.0 * a * b >= 1.0:
        return a
    if 2.0 * m * b <= 1.0:
        return m * math.exp(-2.0 * b * (m - a))
    return math.exp(2.0 * a * b) / (2.0 * math.e * b)


def grid_max(f, lo: float, hi: float, n_grid: int = 20001) -> float:
    """Dense grid maximum refined by a bounded scalar search around the best cell."""
    if hi <= lo:
        return float(f(lo))
    xs = np.linspace(lo, hi, n_grid)
    ys = f(xs)
    i = int(np.argmax(ys))
    best = float(ys[i])
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_grid - 1)]
    if b > a:
        res = minimize_scalar(lambda x: -float(f(np.array([x]))[0]), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-14 * max(1.0, abs(b))})
        best = max(best, -float(res.fun))
    return best


@dataclass
class MaxLemmaReport:
    stated_max_rel_err: float
    corrected_max_rel_err: float
    n_points: int
    stated_failures: int = 0
    examples: list = field(default_factory=list, repr=False)

    def ok(self, rtol: float = 1e-6, which: str = "stated") -> bool:
        err = self.stated_max_rel_err if which == "stated" else self.corrected_max_rel_err
        return err <= rtol


def default_max_lemma_grid():
    """10 x 10 grids: (a, b) for the first lemma, (a, b) at fixed m = 50 for the second."""
    a1 = [1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 20.0, 30.0, 50.0, 100.0]
    b1 = list(np.logspace(-3, 1, 10))
    a2 = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 45.0, 49.0]
    b2 = list(np.logspace(-4, 1, 10))
    return [(a, b) for a in a1 for b in b1], [(a, b, 50.0) for a in a2 for b in b2]


def max_lemma_check(grid_inv_sq=None, grid_linear=None, rtol: float = 1e-6) -> MaxLemmaReport:
    """Compare stated and corrected closed forms with a brute-force maximum."""
    if grid_inv_sq is None or grid_linear is None:
        d1, d2 = default_max_lemma_grid()
        grid_inv_sq = d1 if grid_inv_sq is None else grid_inv_sq
        grid_linear = d2 if grid_linear is None else grid_linear
    worst_stated = 0.0
    worst_fixed = 0.0
    failures = []

    def note(*item):
        failures.append((item[0],) + tuple(float(v) for v in item[1:]))

    for a, b in grid_inv_sq:
        truth = grid_max(lambda x: np.exp(-b * x) / (a - x) ** 2, 0.0, a - 1.0)
        ep = abs(max_lemma_inverse_sq_stated(a, b) - truth) / truth
        ef = abs(max_lemma_inverse_sq(a, b) - truth) / truth
        worst_stated, worst_fixed = max(worst_stated, ep), max(worst_fixed, ef)
        if ep > rtol:
            note("inverse_sq", a, b, truth)
    for a, b, m in grid_linear:
        truth = grid_max(lambda x: np.exp(-2.0 * b * x) * (a + x), 0.0, m - a)
        ep = abs(max_lemma_linear_stated(a, b, m) - truth) / truth
        ef = abs(max_lemma_linear(a, b, m) - truth) / truth
        worst_stated, worst_fixed = max(worst_stated, ep), max(worst_fixed, ef)
        if ep > rtol:
            note("linear", a, b, m, truth)
    return MaxLemmaReport(float(worst_stated), float(worst_fixed), len(grid_inv_sq) + len(grid_linear),
                          len(failures), failures)
