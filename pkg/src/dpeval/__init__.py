"""Differentially private first-visit Monte Carlo policy evaluation."""
from .errors import (
    DpevalError,
    InvalidRegularizationError,
    OracleViolation,
    PrivacyParameterError,
    RankDeficientError,
)
from .estimators import EvalWeights, FeatureMap, feature_norms, solve_lsl, solve_lsw
from .kernels import BACKEND
from .mdp import Mdp, build_chain, exact_values, sample_dataset, visit_probabilities
from .mechanisms import PrivateEstimate, dp_lsl, dp_lsw
from .returns import DatasetSummary, Signature, Trajectory, TrajectoryDataset, aggregate
from .sensitivity import privacy_constants, smooth_bound_lambda, smooth_bound_w

__version__ = "0.1.0"
