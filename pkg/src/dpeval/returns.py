"""First-visit Monte Carlo returns and dataset-level sufficient statistics."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Trajectory:
    """States and rewards of one episode; ``rewards[t]`` is earned at ``states[t]``."""

    states: tuple
    rewards: tuple

    def __post_init__(self):
        if len(self.states) == 0:
            raise ValueError("a trajectory must contain at least one step")
        if len(self.states) != len(self.rewards):
            raise ValueError("states and rewards must have equal length")
        if any(r < 0 for r in self.rewards):
            raise ValueError("rewards must be nonnegative")

    @classmethod
    def from_steps(cls, steps: Sequence[tuple]) -> "Trajectory":
        return cls(tuple(int(s) for s, _ in steps), tuple(float(r) for _, r in steps))

    @property
    def steps(self):
        return list(zip(self.states, self.rewards))

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class TrajectoryDataset:
    trajectories: tuple

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if len(self.trajectories) == 0:
            raise ValueError("a dataset needs at least one trajectory")

    @property
    def m(self) -> int:
        return len(self.trajectories)

    def __len__(self):
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)


@dataclass(frozen=True, eq=False)
class Signature:
    """Number of trajectories visiting each state, plus the dataset size."""

    counts: np.ndarray
    m: int

    def __post_init__(self):
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if np.any(counts < 0) or np.any(counts > self.m):
            raise ValueError("signature counts must lie in [0, m]")
        object.__setattr__(self, "counts", counts)

    @property
    def max_count(self) -> int:
        return int(self.counts.max()) if self.counts.size else 0

    def __eq__(self, other):
        if not isinstance(other, Signature):
            return NotImplemented
        return self.m == other.m and np.array_equal(self.counts, other.counts)


@dataclass(frozen=True, eq=False)
class DatasetSummary:
    """Sufficient statistics of a dataset for both least-squares objectives.

    ``sq_sums[s]`` is the sum over visiting trajectories of the squared
    first-visit return; together with ``f_x`` and the counts it determines
    the ridge objective. ``per_trajectory`` is kept when the summary was built
    from explicit trajectories.
    """

    f_x: np.ndarray
    signature: Signature
    sq_sums: np.ndarray
    per_trajectory: Optional[tuple] = None

    @property
    def m(self) -> int:
        return self.signature.m

    @property
    def counts(self) -> np.ndarray:
        return self.signature.counts

    @property
    def n_states(self) -> int:
        return self.f_x.shape[0]


def first_visit_returns(x: Trajectory, gamma: float) -> dict:
    """Discounted return from the first visit of every state in ``x``."""
    T = len(x)
    returns = [0.0] * T
    g = 0.0
    for t in range(T - 1, -1, -1):
        g = x.rewards[t] + gamma * g
        returns[t] = g
    out = {}
    for t, s in enumerate(x.states):
        if s not in out:
            out[s] = returns[t]
    return out


def aggregate(dataset: TrajectoryDataset, gamma: float, n_states: int) -> DatasetSummary:
    per_traj = tuple(first_visit_returns(x, gamma) for x in dataset)
    sums = np.zeros(n_states)
    sq = np.zeros(n_states)
    counts = np.zeros(n_states, dtype=np.int64)
    for fv in per_traj:
        for s, f in fv.items():
            if not 0 <= s < n_states:
                raise ValueError(f"state {s} outside 0..{n_states - 1}")
            sums[s] += f
            sq[s] += f * f
            counts[s] += 1
    return _summary(sums, sq, counts, dataset.m, per_traj)


def summary_from_flat(states, rewards, offsets, gamma: float, n_states: int) -> DatasetSummary:
    """Aggregate flat trajectory arrays (as produced by the samplers)."""
    sums, sq, counts = kernels.first_visit_stats(
        np.ascontiguousarray(states, dtype=np.int64),
        np.ascontiguousarray(rewards, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        n_states,
        gamma,
    )
    return _summary(sums, sq, counts, len(offsets) - 1, None)


def _summary(sums, sq, counts, m, per_traj):
    f_x = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return DatasetSummary(f_x, Signature(counts, m), sq, per_traj)


def neighbor_replace_last(dataset: TrajectoryDataset, x_new: Trajectory) -> TrajectoryDataset:
    return TrajectoryDataset(dataset.trajectories[:-1] + (x_new,))


def visited(x: Trajectory) -> frozenset:
    return frozenset(x.states)


# -- trajectory batch files ------------------------------------------------
#
# One trajectory per line as space-separated ``state:reward`` pairs, states
# 0-indexed. Everything after ``#`` on a line is ignored.


def parse_trajectories(text: str) -> TrajectoryDataset:
    trajs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        steps = []
        for tok in line.split():
            try:
                s, r = tok.split(":")
                steps.append((int(s), float(r)))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad step {tok!r}") from exc
        trajs.append(Trajectory.from_steps(steps))
    return TrajectoryDataset(tuple(trajs))


def format_trajectories(dataset: TrajectoryDataset) -> str:
    lines = [" ".join(f"{s}:{r!r}" for s, r in x.steps) for x in dataset]
    return "\n".join(lines) + "\n"


def read_trajectories(path: "str | os.PathLike") -> TrajectoryDataset:
    with open(path, encoding="utf-8") as fh:
        return parse_trajectories(fh.read())


def write_trajectories(dataset: TrajectoryDataset, path: "str | os.PathLike") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trajectories(dataset))


def returns_matrix(per_trajectory: Sequence[Mapping[int, float]], n_states: int):
    """Dense ``(m, N)`` returns and visit indicators from per-trajectory maps."""
    F = np.zeros((len(per_trajectory), n_states))
    I = np.zeros((len(per_trajectory), n_states), dtype=bool)
    for i, fv in enumerate(per_trajectory):
        for s, f in fv.items():
            F[i, s] = f
            I[i, s] = True
    return F, I
