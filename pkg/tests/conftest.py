import numpy as np
import pytest

from dpeval.estimators import EvalWeights, FeatureMap
from dpeval.mdp import build_chain
from dpeval.returns import Trajectory, TrajectoryDataset


@pytest.fixture
def chain40():
    return build_chain(40, 0.5, 0.99)


@pytest.fixture
def tabular40():
    """Identity features on the 39 transient states plus a zero absorbing row."""
    phi = np.vstack([np.eye(39), np.zeros((1, 39))])
    return FeatureMap(phi)


@pytest.fixture
def transient_ones40():
    w = np.append(np.ones(39), 0.0)
    return EvalWeights.fixed(w), EvalWeights.rho(w)


def traj(*steps):
    return Trajectory.from_steps(steps)


def dataset(*trajs):
    return TrajectoryDataset(tuple(trajs))
