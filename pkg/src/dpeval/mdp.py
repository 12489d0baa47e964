"""Tabular Markov reward processes: chain generator, exact values, sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .returns import Trajectory, TrajectoryDataset

STEP_CAP = 10**7


@dataclass(frozen=True, eq=False)
class Mdp:
    """An MDP under a fixed policy, i.e. a Markov reward process.

    ``rewards[s, s2]`` is paid on the transition ``s -> s2``. Absorbing states
    are never recorded in trajectories and have value 0.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    r_max: float
    absorbing: frozenset
    start_dist: np.ndarray
    _cum_trans: np.ndarray = field(init=False, repr=False)
    _cum_start: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = np.ascontiguousarray(self.transitions, dtype=np.float64)
        R = np.ascontiguousarray(self.rewards, dtype=np.float64)
        start = np.ascontiguousarray(self.start_dist, dtype=np.float64)
        n = P.shape[0]
        if P.shape != (n, n) or R.shape != (n, n) or start.shape != (n,):
            raise ValueError("transitions, rewards and start_dist must be N x N, N x N and N")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must be nonnegative and sum to 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.r_max < 0 or np.any(R < 0) or np.any(R > self.r_max):
            raise ValueError("rewards must lie in [0, r_max]")
        absorbing = frozenset(int(s) for s in self.absorbing)
        if any(not 0 <= s < n for s in absorbing):
            raise ValueError("absorbing state index out of range")
        if np.any(start < 0) or abs(start.sum() - 1.0) > 1e-12:
            raise ValueError("start_dist must be a probability vector")
        if any(start[s] != 0 for s in absorbing):
            raise ValueError("start_dist must put zero mass on absorbing states")
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", R)
        object.__setattr__(self, "start_dist", start)
        object.__setattr__(self, "absorbing", absorbing)
        object.__setattr__(self, "_cum_trans", np.stack([_padded_cumsum(row) for row in P]))
        object.__setattr__(self, "_cum_start", _padded_cumsum(start))

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def transient(self) -> np.ndarray:
        return np.array([s for s in range(self.n_states) if s not in self.absorbing], dtype=int)

    @property
    def absorbing_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=np.uint8)
        mask[list(self.absorbing)] = 1
        return mask

    @property
    def f_max_default(self) -> float:
        return self.r_max / (1.0 - self.gamma)


def _padded_cumsum(p):
    # entries past the last positive probability are set to 1.0 so that
    # "first index with cum > u" always lands on a reachable state
    cum = np.cumsum(p)
    last = np.flatnonzero(p > 0)[-1]
    cum[last:] = 1.0
    return np.ascontiguousarray(cum)


@dataclass(frozen=True)
class VisitStats:
    """Visit, co-visit and exclusion probabilities of a single trajectory."""

    p: np.ndarray
    p_pair: np.ndarray
    p_excl: np.ndarray


def build_chain(n_states: int, stay_prob: float, gamma: float, start_dist=None) -> Mdp:
    """Chain of ``n_states`` states; the last one is absorbing.

    Each transient state stays put with probability ``stay_prob`` and moves one
    step right otherwise. Reward 1 is paid on the transition into the
    absorbing state. The default start distribution is uniform over the
    transient states.
    """
    if n_states < 2:
        raise ValueError("a chain needs at least 2 states")
    if not 0.0 <= stay_prob < 1.0:
        raise ValueError(f"stay_prob must lie in [0, 1), got {stay_prob}")
    N = n_states
    P = np.zeros((N, N))
    R = np.zeros((N, N))
    for s in range(N - 1):
        P[s, s] = stay_prob
        P[s, s + 1] += 1.0 - stay_prob
    P[N - 1, N - 1] = 1.0
    R[N - 2, N - 1] = 1.0
    if start_dist is None:
        start_dist = np.append(np.full(N - 1, 1.0 / (N - 1)), 0.0)
    return Mdp(P, R, gamma, 1.0, frozenset({N - 1}), np.asarray(start_dist, dtype=float))


def point_start(n_states: int, state: int = 0) -> np.ndarray:
    start = np.zeros(n_states)
    start[state] = 1.0
    return start


def expected_rewards(mdp: Mdp) -> np.ndarray:
    return (mdp.transitions * mdp.rewards).sum(axis=1)


def exact_values(mdp: Mdp) -> np.ndarray:
    """Solve V = r_bar + gamma P V by a dense linear solve."""
    A = np.eye(mdp.n_states) - mdp.gamma * mdp.transitions
    try:
        V = np.linalg.solve(A, expected_rewards(mdp))
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular Bellman system: {exc}") from exc
    V[list(mdp.absorbing)] = 0.0
    return V


def sample_trajectory(mdp: Mdp, rng: np.random.Generator, step_cap: int = STEP_CAP) -> Trajectory:
    states, rewards, _ = kernels.sample_batch(
        mdp._cum_start, mdp._cum_trans, mdp.absorbing_mask, mdp.rewards, 1, rng, step_cap
    )
    return Trajectory(tuple(int(s) for s in states), tuple(float(r) for r in rewards))


def sample_flat(mdp: Mdp, m: int, rng: np.random.Generator, step_cap: int = STEP_CAP):
    """Sample ``m`` trajectories as flat ``(states, rewards, offsets)`` arrays.

    The generator state after the call is backend dependent; draw anything
    else from a separate stream.
    """
    return kernels.sample_batch(
        mdp._cum_start, mdp._cum_trans, mdp.absorbing_mask, mdp.rewards, m, rng, step_cap
    )


def sample_dataset(mdp: Mdp, m: int, rng: np.random.Generator) -> TrajectoryDataset:
    states, rewards, offsets = sample_flat(mdp, m, rng)
    trajs = []
    for a, b in zip(offsets[:-1], offsets[1:]):
        trajs.append(Trajectory(tuple(states[a:b].tolist()), tuple(rewards[a:b].tolist())))
    return TrajectoryDataset(tuple(trajs))


def _is_forward_chain(mdp: Mdp) -> bool:
    P = mdp.transitions
    n = mdp.n_states
    for s in range(n):
        allowed = P[s, s] + (P[s, s + 1] if s + 1 < n else 0.0)
        if abs(allowed - 1.0) > 1e-12:
            return False
        if s not in mdp.absorbing and s + 1 < n and P[s, s + 1] <= 0:
            return False
    return True


def visit_probabilities(mdp: Mdp) -> VisitStats:
    """Closed-form visit statistics for forward-only chains.

    A trajectory started at ``s0`` visits exactly the transient states
    ``s0, s0 + 1, ...``, so ``p_s`` is the start mass at or below ``s``.
    """
    if not _is_forward_chain(mdp) or mdp.absorbing != {mdp.n_states - 1}:
        raise ValueError("closed-form visit probabilities need a forward-only chain")
    p = np.cumsum(mdp.start_dist)
    p[list(mdp.absorbing)] = 0.0
    p = np.clip(p, 0.0, 1.0)
    p_pair = np.minimum(p[:, None], p[None, :])
    p_excl = np.maximum(0.0, p[:, None] - p[None, :])
    return VisitStats(p, p_pair, p_excl)
