"""Noise calibration: privacy constants, sensitivity proxies and smooth bounds.

Both mechanisms release ``theta + N(0, sigma^2 I)`` with
``sigma = prefactor * sqrt(psi)``. The prefactor depends only on public
quantities; ``psi`` is a beta-smooth upper bound of a signature-only proxy
for the local sensitivity, found by exhaustive search over the smoothing
radius ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidRegularizationError, PrivacyParameterError
from .estimators import EvalWeights, FIXED_W
from .returns import Signature

MAIN = "main"
CONSERVATIVE = "conservative"


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float
    d: int
    alpha: float
    beta: float
    constants: str = MAIN


@dataclass(frozen=True)
class SensitivityReport:
    psi: float
    argmax_k: int
    k_range: int
    constant_prefactor: float = math.nan
    sigma: float = math.nan
    f_max: float = math.nan

    def with_sigma(self, prefactor: float, f_max: float) -> "SensitivityReport":
        return SensitivityReport(
            self.psi, self.argmax_k, self.k_range, prefactor, prefactor * math.sqrt(self.psi), f_max
        )


def privacy_constants(epsilon: float, delta: float, d: int, constants: str = MAIN) -> PrivacyBudget:
    """Gaussian calibration constants (alpha, beta).

    ``constants="main"``: alpha = 5 sqrt(2 ln(2/delta)) / eps,
    beta = eps / (4 (d + ln(2/delta))).

    ``constants="conservative"``: the variant with an elementary proof,
    alpha = 15 sqrt(2 ln(4/delta)) / eps,
    beta = 2 ln2 eps / (5 (sqrt(d) + sqrt(2 ln(4/delta)))^2); valid for eps <= 5
    and beta <= ln 2.
    """
    if not epsilon > 0:
        raise PrivacyParameterError(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise PrivacyParameterError(f"delta must lie in (0, 1), got {delta}")
    if int(d) != d or d < 1:
        raise PrivacyParameterError(f"d must be a positive integer, got {d}")
    d = int(d)
    if constants == MAIN:
        L = math.log(2.0 / delta)
        alpha = 5.0 * math.sqrt(2.0 * L) / epsilon
        beta = epsilon / (4.0 * (d + L))
    elif constants == CONSERVATIVE:
        if epsilon > 5:
            raise PrivacyParameterError("conservative constants require epsilon <= 5")
        C = math.sqrt(2.0 * math.log(4.0 / delta))
        alpha = 15.0 * C / epsilon
        beta = 2.0 * math.log(2.0) * epsilon / (5.0 * (math.sqrt(d) + C) ** 2)
        if beta > math.log(2.0):
            raise PrivacyParameterError("conservative constants require beta <= ln 2")
    else:
        raise ValueError(f"unknown constants {constants!r}")
    return PrivacyBudget(float(epsilon), float(delta), d, alpha, beta, constants)


def _counts(signature) -> np.ndarray:
    if isinstance(signature, Signature):
        return signature.counts
    return np.ascontiguousarray(signature, dtype=np.int64)


def phi_w(signature, w: EvalWeights, k: int) -> float:
    """sum_s w_s / max(v_s - k, 1)^2: the largest proxy within distance k of v."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    v = _counts(signature)
    r = np.maximum(v - k, 1).astype(np.float64)
    return float(np.sum(w.values / (r * r)))


def smooth_bound_w(signature, w: EvalWeights, budget: PrivacyBudget) -> SensitivityReport:
    if w.kind != FIXED_W:
        raise ValueError("smooth_bound_w needs fixed weights")
    v = _counts(signature)
    psi, k, K = kernels.smooth_max_w(v, w.values, budget.beta)
    # the kernel sums in its own order; never report below phi(k=0)
    return SensitivityReport(max(float(psi), phi_w(v, w, 0)), int(k), int(K))


def c_lambda(op_norm: float, rho: EvalWeights, lam: float) -> float:
    return op_norm * rho.inf_norm / math.sqrt(2.0 * lam)


def phi_lambda(signature: Signature, rho: EvalWeights, k: int, lam: float, op_norm: float) -> float:
    """(c * sqrt(sum_s rho_s min(v_s + k, m)) + |rho|_2)^2 with c = |Phi| |rho|_inf / sqrt(2 lam)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    v = signature.counts
    capped = np.minimum(v + k, signature.m).astype(np.float64)
    root = c_lambda(op_norm, rho, lam) * math.sqrt(float(np.sum(rho.values * capped))) + rho.l2_norm
    return root * root


def smooth_bound_lambda(signature: Signature, rho: EvalWeights, lam: float, op_norm: float,
                        budget: PrivacyBudget) -> SensitivityReport:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    psi, k, K = kernels.smooth_max_lambda(
        signature.counts, rho.values, int(signature.m), c_lambda(op_norm, rho, lam), rho.l2_norm, budget.beta
    )
    return SensitivityReport(max(float(psi), phi_lambda(signature, rho, 0, lam, op_norm)), int(k), int(K))


def _check_f_max(f_max, r_max, gamma):
    ceiling = r_max / (1.0 - gamma)
    if f_max is None:
        return ceiling
    if f_max < 0:
        raise PrivacyParameterError("f_max must be nonnegative")
    # tiny slack for f_max passed as the literal ceiling
    if f_max > ceiling * (1 + 1e-12):
        raise PrivacyParameterError(
            f"f_max={f_max} exceeds r_max/(1-gamma)={ceiling}; the return bound must hold for every trajectory"
        )
    return float(f_max)


def resolve_f_max(f_max, r_max: float, gamma: float) -> float:
    """Public return bound: ``r_max / (1 - gamma)`` unless a smaller one is given."""
    return _check_f_max(f_max, r_max, gamma)


def lsw_prefactor(budget: PrivacyBudget, f_max: float, pinv_norm: float) -> float:
    return budget.alpha * f_max * pinv_norm


def sigma_lsw(psi: float, budget: PrivacyBudget, f_max: float, pinv_norm: float) -> float:
    """alpha * F_max * |(Gamma^1/2 Phi)^+| * sqrt(psi)."""
    if psi < 0:
        raise ValueError("psi must be nonnegative")
    return lsw_prefactor(budget, f_max, pinv_norm) * math.sqrt(psi)


def check_lambda(lam: float, op_norm: float, rho_inf: float) -> None:
    threshold = op_norm**2 * rho_inf
    if not lam > threshold:
        raise InvalidRegularizationError(
            f"lambda={lam} must exceed |Phi|^2 |rho|_inf = {threshold}"
        )


def lsl_prefactor(budget: PrivacyBudget, f_max: float, op_norm: float, rho_inf: float, lam: float) -> float:
    check_lambda(lam, op_norm, rho_inf)
    return 2.0 * budget.alpha * f_max * op_norm / (lam - op_norm**2 * rho_inf)


def sigma_lsl(psi: float, budget: PrivacyBudget, f_max: float, op_norm: float, rho_inf: float, lam: float) -> float:
    """2 alpha F_max |Phi| / (lam - |Phi|^2 |rho|_inf) * sqrt(psi).

    ``f_max`` stands in for ``r_max / (1 - gamma)``; see :func:`resolve_f_max`.
    """
    if psi < 0:
        raise ValueError("psi must be nonnegative")
    return lsl_prefactor(budget, f_max, op_norm, rho_inf, lam) * math.sqrt(psi)
