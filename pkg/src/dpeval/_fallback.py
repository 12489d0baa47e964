"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Sampling consumes the uniform stream exactly as the compiled sampler does
(one double for the start state, one per step), so both backends return
identical trajectories for identical generator states.
"""
from __future__ import annotations

import bisect

import numpy as np

_BLOCK = 4096


def _draw_index(cum, u):
    # first index with cum > u
    return bisect.bisect_right(cum, u)


def sample_batch(cum_start, cum_trans, absorbing, rewards, n_traj, rng, step_cap):
    cum_start = list(cum_start)
    rows = [list(r) for r in cum_trans]
    absorbing = [bool(a) for a in absorbing]
    rewards = np.asarray(rewards).tolist()

    buf = rng.random(_BLOCK)
    pos = 0

    states, rws = [], []
    offsets = np.zeros(n_traj + 1, dtype=np.int64)
    for i in range(n_traj):
        if pos == _BLOCK:
            buf, pos = rng.random(_BLOCK), 0
        s = _draw_index(cum_start, buf[pos])
        pos += 1
        steps = 0
        while not absorbing[s]:
            if steps >= step_cap:
                raise RuntimeError(f"trajectory exceeded step cap of {step_cap} steps")
            if pos == _BLOCK:
                buf, pos = rng.random(_BLOCK), 0
            nxt = _draw_index(rows[s], buf[pos])
            pos += 1
            states.append(s)
            rws.append(rewards[s][nxt])
            steps += 1
            s = nxt
        offsets[i + 1] = len(states)
    return (np.asarray(states, dtype=np.int64), np.asarray(rws, dtype=np.float64), offsets)


def first_visit_stats(states, rewards, offsets, n_states, gamma):
    sums = np.zeros(n_states)
    sumsq = np.zeros(n_states)
    counts = np.zeros(n_states, dtype=np.int64)
    states = np.asarray(states).tolist()
    rewards = np.asarray(rewards).tolist()
    offsets = np.asarray(offsets).tolist()
    for a, b in zip(offsets[:-1], offsets[1:]):
        g = 0.0
        returns = [0.0] * (b - a)
        for t in range(b - a - 1, -1, -1):
            g = rewards[a + t] + gamma * g
            returns[t] = g
        seen = set()
        for t in range(b - a):
            s = states[a + t]
            if s not in seen:
                seen.add(s)
                sums[s] += returns[t]
                sumsq[s] += returns[t] * returns[t]
                counts[s] += 1
    return sums, sumsq, counts


def _chunked_argmax(values_for, n_k, chunk=2048):
    best, best_k = -1.0, 0
    for start in range(0, n_k, chunk):
        ks = np.arange(start, min(start + chunk, n_k))
        vals = values_for(ks)
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_k = float(vals[j]), int(ks[j])
    return best, best_k


def smooth_max_w(counts, w, beta):
    counts = np.asarray(counts, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    K = int(counts.max()) if counts.size else 0

    def values(ks):
        r = np.maximum(counts[None, :] - ks[:, None], 1).astype(np.float64)
        return np.exp(-ks * beta) * (w[None, :] / (r * r)).sum(axis=1)

    best, best_k = _chunked_argmax(values, K + 1)
    return best, best_k, K


def smooth_max_lambda(counts, rho, m, c_lam, rho_norm2, beta):
    counts = np.asarray(counts, dtype=np.int64)
    rho = np.asarray(rho, dtype=np.float64)

    def values(ks):
        capped = np.minimum(counts[None, :] + ks[:, None], m).astype(np.float64)
        root = c_lam * np.sqrt((rho[None, :] * capped).sum(axis=1)) + rho_norm2
        return np.exp(-ks * beta) * root * root

    best, best_k = _chunked_argmax(values, m + 1)
    return best, best_k, m
