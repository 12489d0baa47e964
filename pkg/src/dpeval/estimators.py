"""Non-private least-squares value estimates and their objectives.

Diagonal weight matrices are never formed; rows of the feature matrix are
scaled instead. All solves go through an SVD of the weighted features.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficientError
from .returns import DatasetSummary, returns_matrix

RANK_RTOL = 1e-10

FIXED_W = "fixed_w"
REGRESSION_RHO = "regression_rho"


@dataclass(frozen=True, eq=False)
class FeatureMap:
    phi: np.ndarray

    def __post_init__(self):
        phi = np.ascontiguousarray(self.phi, dtype=np.float64)
        if phi.ndim != 2:
            raise ValueError("feature matrix must be 2-D (states x features)")
        if not np.all(np.isfinite(phi)):
            raise ValueError("feature matrix has non-finite entries")
        object.__setattr__(self, "phi", phi)

    @property
    def n_states(self) -> int:
        return self.phi.shape[0]

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def identity(cls, n: int) -> "FeatureMap":
        return cls(np.eye(n))


@dataclass(frozen=True, eq=False)
class EvalWeights:
    kind: str
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.kind == FIXED_W:
            if np.any(values < 0) or values.sum() <= 0:
                raise ValueError("fixed weights must be nonnegative with a positive sum")
        elif self.kind == REGRESSION_RHO:
            if np.any(values < 0) or np.any(values > 1):
                raise ValueError("regression weights must lie in [0, 1]")
        else:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        object.__setattr__(self, "values", values)

    @classmethod
    def fixed(cls, values) -> "EvalWeights":
        return cls(FIXED_W, values)

    @classmethod
    def rho(cls, values) -> "EvalWeights":
        return cls(REGRESSION_RHO, values)

    @property
    def inf_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class FeatureNorms:
    op_norm: float
    pinv_norm: float
    frob_norm: float


def _svd(A):
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    return U, S, Vt


def feature_norms(features: FeatureMap, weights: EvalWeights) -> FeatureNorms:
    """Spectral norm of the features, and pseudo-inverse / Frobenius norms of the
    row-weighted features."""
    op = float(np.linalg.svd(features.phi, compute_uv=False)[0]) if features.phi.size else 0.0
    scaled = np.sqrt(weights.values)[:, None] * features.phi
    S = np.linalg.svd(scaled, compute_uv=False)
    nz = S[S > RANK_RTOL * S[0]] if S.size and S[0] > 0 else S[:0]
    pinv = float(1.0 / nz[-1]) if nz.size else 0.0
    return FeatureNorms(op, pinv, float(np.linalg.norm(scaled)))


def solve_lsw(summary: DatasetSummary, features: FeatureMap, w: EvalWeights) -> np.ndarray:
    """Minimiser of sum_s w_s (F_s - phi_s . theta)^2."""
    if w.kind != FIXED_W:
        raise ValueError("solve_lsw needs fixed weights")
    root_w = np.sqrt(w.values)
    U, S, Vt = _svd(root_w[:, None] * features.phi)
    if S.size < features.d or S[-1] < RANK_RTOL * S[0] or S[0] == 0:
        raise RankDeficientError(
            "weighted feature matrix is rank deficient "
            f"(singular values {S.min() if S.size else 0.0:.3g} .. {S.max() if S.size else 0.0:.3g})"
        )
    target = root_w * summary.f_x
    theta = Vt.T @ ((U.T @ target) / S)

    rhs = features.phi.T @ (w.values * summary.f_x)
    lhs = features.phi.T @ (w.values * (features.phi @ theta))
    scale = max(np.max(np.abs(rhs)), np.finfo(float).tiny)
    if np.max(np.abs(lhs - rhs)) > 1e-8 * scale:
        raise RankDeficientError("normal-equation residual check failed")
    return theta


def lsl_gamma(summary: DatasetSummary, rho: EvalWeights) -> np.ndarray:
    """Diagonal of rho_s |X_s| / m."""
    return rho.values * summary.counts / summary.m


def solve_lsl(summary: DatasetSummary, features: FeatureMap, rho: EvalWeights, lam: float) -> np.ndarray:
    """Ridge minimiser of the per-trajectory first-visit objective."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    g = np.sqrt(lsl_gamma(summary, rho))
    U, S, Vt = _svd(g[:, None] * features.phi)
    shrink = S / (S * S + lam / (2.0 * summary.m))
    # components outside the row space of the weighted features are shrunk to 0
    return Vt[: S.size].T @ (shrink * (U.T @ (g * summary.f_x)))


def _predict(features, theta):
    theta = np.asarray(theta, dtype=np.float64)
    return theta @ features.phi.T  # (..., N)


def empirical_risk_w(theta, summary: DatasetSummary, features: FeatureMap, w: EvalWeights):
    """Weighted squared error; ``theta`` may be a single vector or a stack of rows."""
    resid = summary.f_x - _predict(features, theta)
    return (w.values * resid * resid).sum(axis=-1)


def empirical_risk_lambda(theta, summary: DatasetSummary, features: FeatureMap, rho: EvalWeights, lam: float):
    """Per-trajectory first-visit squared error plus the ridge penalty.

    Uses the per-trajectory returns when present, otherwise the expanded
    form built from per-state sums of returns and squared returns.
    """
    theta = np.asarray(theta, dtype=np.float64)
    pred = _predict(features, theta)
    m = summary.m
    if summary.per_trajectory is not None:
        F, I = returns_matrix(summary.per_trajectory, summary.n_states)
        resid = F - pred[..., None, :]
        data = (rho.values * I * resid * resid).sum(axis=(-1, -2)) / m
    elif summary.sq_sums is not None:
        counts = summary.counts
        sums = summary.f_x * counts
        per_state = summary.sq_sums - 2.0 * pred * sums + counts * pred * pred
        data = (rho.values * per_state).sum(axis=-1) / m
    else:
        raise ValueError("summary carries neither per-trajectory returns nor squared sums")
    return data + lam / (2.0 * m) * (theta * theta).sum(axis=-1)


def grad_risk_w(theta, summary, features, w):
    return 2.0 * features.phi.T @ (w.values * (features.phi @ theta - summary.f_x))


def grad_risk_lambda(theta, summary, features, rho, lam):
    g = lsl_gamma(summary, rho)
    return 2.0 * features.phi.T @ (g * (features.phi @ theta - summary.f_x)) + lam / summary.m * theta
