"""The two private estimators: output perturbation of the LSW and LSL solutions."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import rng as rngmod
from .estimators import (
    EvalWeights,
    FeatureMap,
    FeatureNorms,
    feature_norms,
    solve_lsl,
    solve_lsw,
)
from .returns import DatasetSummary, TrajectoryDataset, aggregate
from .sensitivity import (
    MAIN,
    PrivacyBudget,
    SensitivityReport,
    check_lambda,
    lsl_prefactor,
    lsw_prefactor,
    privacy_constants,
    resolve_f_max,
    smooth_bound_lambda,
    smooth_bound_w,
)

LSW = "lsw"
LSL = "lsl"


@dataclass(frozen=True, eq=False)
class PrivateEstimate:
    """A release plus the private quantities that produced it.

    Only ``theta_hat`` and the public parameters may leave the trust
    boundary; ``theta`` and everything in ``report`` depend on the data.
    """

    theta: np.ndarray
    theta_hat: np.ndarray
    sigma: float
    report: SensitivityReport
    budget: PrivacyBudget
    mechanism: str
    gamma: float
    r_max: float
    lam: Optional[float] = None

    @property
    def noise(self) -> np.ndarray:
        return self.theta_hat - self.theta

    def values(self, features: FeatureMap) -> np.ndarray:
        """Released value function; uses nothing but the release and the public features."""
        return features.phi @ self.theta_hat


def _summarize(data: Union[TrajectoryDataset, DatasetSummary], gamma: float, n_states: int) -> DatasetSummary:
    if isinstance(data, DatasetSummary):
        return data
    return aggregate(data, gamma, n_states)


def gaussian_noise(rng: np.random.Generator, sigma: float, d: int) -> np.ndarray:
    return sigma * rngmod.standard_normal(rng, d)


def dp_lsw(data, features: FeatureMap, w: EvalWeights, gamma: float, r_max: float, epsilon: float,
           delta: float, rng: np.random.Generator, f_max: Optional[float] = None,
           constants: str = MAIN, norms: Optional[FeatureNorms] = None) -> PrivateEstimate:
    """Private fixed-weight least-squares estimate.

    ``data`` is a trajectory dataset or an already aggregated summary.
    ``norms`` may be passed to reuse a cached :func:`feature_norms` result.
    """
    budget = privacy_constants(epsilon, delta, features.d, constants)
    f_max = resolve_f_max(f_max, r_max, gamma)
    summary = _summarize(data, gamma, features.n_states)
    theta = solve_lsw(summary, features, w)
    norms = norms or feature_norms(features, w)
    report = smooth_bound_w(summary.signature, w, budget)
    report = report.with_sigma(lsw_prefactor(budget, f_max, norms.pinv_norm), f_max)
    eta = gaussian_noise(rng, report.sigma, features.d)
    return PrivateEstimate(theta, theta + eta, report.sigma, report, budget, LSW, gamma, r_max)


def dp_lsl(data, features: FeatureMap, rho: EvalWeights, lam: float, gamma: float, r_max: float,
           epsilon: float, delta: float, rng: np.random.Generator, f_max: Optional[float] = None,
           constants: str = MAIN, norms: Optional[FeatureNorms] = None) -> PrivateEstimate:
    """Private ridge-regularised estimate; needs ``lam > |Phi|^2 |rho|_inf``."""
    norms = norms or feature_norms(features, rho)
    check_lambda(lam, norms.op_norm, rho.inf_norm)
    budget = privacy_constants(epsilon, delta, features.d, constants)
    f_max = resolve_f_max(f_max, r_max, gamma)
    summary = _summarize(data, gamma, features.n_states)
    theta = solve_lsl(summary, features, rho, lam)
    report = smooth_bound_lambda(summary.signature, rho, lam, norms.op_norm, budget)
    report = report.with_sigma(lsl_prefactor(budget, f_max, norms.op_norm, rho.inf_norm, lam), f_max)
    eta = gaussian_noise(rng, report.sigma, features.d)
    return PrivateEstimate(theta, theta + eta, report.sigma, report, budget, LSL, gamma, r_max, lam)


# -- serialisation -----------------------------------------------------------
#
# ``key = value`` lines under ``[public]`` and ``[private]`` headers. Floats
# are written with repr() so they parse back bit for bit; vectors are
# bracketed comma lists.


def _fmt(value) -> str:
    if isinstance(value, np.ndarray):
        return "[" + ", ".join(repr(float(x)) for x in value) + "]"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_estimate(est: PrivateEstimate, include_private: bool = False) -> str:
    b = est.budget
    public = [
        ("mechanism", est.mechanism),
        ("epsilon", b.epsilon),
        ("delta", b.delta),
        ("d", b.d),
        ("constants", b.constants),
        ("alpha", b.alpha),
        ("beta", b.beta),
        ("gamma", float(est.gamma)),
        ("r_max", float(est.r_max)),
        ("f_max", float(est.report.f_max)),
    ]
    if est.lam is not None:
        public.append(("lambda", float(est.lam)))
    public += [
        ("rng", f"{rngmod.RNG_ALGORITHM}/{rngmod.NORMAL_METHOD}"),
        ("theta_hat", est.theta_hat),
    ]
    lines = ["[public]"] + [f"{k} = {_fmt(v)}" for k, v in public]
    if include_private:
        r = est.report
        private = [
            ("theta", est.theta),
            ("sigma", float(est.sigma)),
            ("psi", float(r.psi)),
            ("argmax_k", r.argmax_k),
            ("k_range", r.k_range),
            ("constant_prefactor", float(r.constant_prefactor)),
        ]
        lines += ["", "[private]"] + [f"{k} = {_fmt(v)}" for k, v in private]
    return "\n".join(lines) + "\n"


def parse_sections(text: str) -> dict:
    """Parse ``[section]`` / ``key = value`` text into nested dicts.

    Values that parse as JSON (numbers, bracketed lists) are decoded; anything
    else is kept as a string.
    """
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]") and "=" not in line:
            section = line[1:-1].strip()
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        out.setdefault(section, {})[key] = _decode(value)
    return out


def _decode(value: str):
    try:
        decoded = json.loads(value)
    except json.JSONDecodeError:
        return value
    if isinstance(decoded, list):
        return [float(x) if isinstance(x, (int, float)) else x for x in decoded]
    return decoded


def parse_estimate(text: str) -> dict:
    sections = parse_sections(text)
    if "public" not in sections:
        raise ValueError("missing [public] section")
    for sec in sections.values():
        for k in ("theta_hat", "theta"):
            if k in sec:
                sec[k] = np.asarray(sec[k], dtype=float)
    return sections


def release_is_consistent(parsed: dict) -> bool:
    """True when a parsed release's public constants match its own (epsilon, delta, d)."""
    pub = parsed["public"]
    b = privacy_constants(pub["epsilon"], pub["delta"], pub["d"], pub.get("constants", MAIN))
    return math.isclose(b.alpha, pub["alpha"], rel_tol=0, abs_tol=0) and math.isclose(
        b.beta, pub["beta"], rel_tol=0, abs_tol=0
    )
