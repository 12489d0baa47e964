# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: trajectory sampling, first-visit statistics, smooth bounds.

Every function here has a behaviourally identical twin in ``_fallback``;
``dpeval.kernels`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, sqrt
from libc.stdlib cimport free, malloc, realloc
from numpy.random cimport bitgen_t

cnp.import_array()


cdef inline Py_ssize_t _draw_index(const double[::1] cum, double u) noexcept nogil:
    # first index with cum > u; cum is padded with 1.0 past its last positive entry
    cdef Py_ssize_t lo = 0, hi = cum.shape[0] - 1, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if cum[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef bitgen_t* _bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("rng does not expose a numpy BitGenerator")
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def sample_batch(const double[::1] cum_start, const double[:, ::1] cum_trans,
                 const unsigned char[::1] absorbing, const double[:, ::1] rewards,
                 Py_ssize_t n_traj, object rng, long long step_cap):
    """Sample ``n_traj`` trajectories; one uniform per start and per step.

    Returns flat ``(states, rewards, offsets)`` with trajectory ``i`` stored in
    ``[offsets[i], offsets[i + 1])``.
    """
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t cap = 1024, n = 0, i, s, nxt
    cdef long long steps
    cdef bint overflow = False
    cdef long long* st = <long long*> malloc(cap * sizeof(long long))
    cdef double* rw = <double*> malloc(cap * sizeof(double))
    cdef long long* tmp_s
    cdef double* tmp_r
    offsets = np.zeros(n_traj + 1, dtype=np.int64)
    cdef long long[::1] off = offsets
    if st == NULL or rw == NULL:
        free(st)
        free(rw)
        raise MemoryError()
    try:
        with rng.bit_generator.lock:
            with nogil:
                for i in range(n_traj):
                    s = _draw_index(cum_start, bg.next_double(bg.state))
                    steps = 0
                    while not absorbing[s]:
                        if steps >= step_cap:
                            overflow = True
                            break
                        nxt = _draw_index(cum_trans[s], bg.next_double(bg.state))
                        if n == cap:
                            cap *= 2
                            tmp_s = <long long*> realloc(st, cap * sizeof(long long))
                            tmp_r = <double*> realloc(rw, cap * sizeof(double))
                            if tmp_s != NULL:
                                st = tmp_s
                            if tmp_r != NULL:
                                rw = tmp_r
                            if tmp_s == NULL or tmp_r == NULL:
                                with gil:
                                    raise MemoryError()
                        st[n] = s
                        rw[n] = rewards[s, nxt]
                        n += 1
                        steps += 1
                        s = nxt
                    if overflow:
                        break
                    off[i + 1] = n
        if overflow:
            raise RuntimeError(f"trajectory exceeded step cap of {step_cap} steps")
        states_out = np.empty(n, dtype=np.int64)
        rewards_out = np.empty(n, dtype=np.float64)
        for i in range(n):
            states_out[i] = st[i]
            rewards_out[i] = rw[i]
    finally:
        free(st)
        free(rw)
    return states_out, rewards_out, offsets


def first_visit_stats(const long long[::1] states, const double[::1] rewards,
                      const long long[::1] offsets, Py_ssize_t n_states, double gamma):
    """Per-state sum, sum of squares and count of first-visit returns."""
    sums = np.zeros(n_states, dtype=np.float64)
    sumsq = np.zeros(n_states, dtype=np.float64)
    counts = np.zeros(n_states, dtype=np.int64)
    cdef double[::1] S = sums, Q = sumsq
    cdef long long[::1] C = counts
    cdef Py_ssize_t n_traj = offsets.shape[0] - 1
    cdef Py_ssize_t i, t, a, b, s, longest = 0
    for i in range(n_traj):
        if offsets[i + 1] - offsets[i] > longest:
            longest = offsets[i + 1] - offsets[i]
    ret_buf = np.empty(max(longest, 1), dtype=np.float64)
    stamp_buf = np.full(n_states, -1, dtype=np.int64)
    cdef double[::1] G = ret_buf
    cdef long long[::1] stamp = stamp_buf
    cdef double g
    with nogil:
        for i in range(n_traj):
            a = offsets[i]
            b = offsets[i + 1]
            g = 0.0
            t = b - a - 1
            while t >= 0:
                g = rewards[a + t] + gamma * g
                G[t] = g
                t -= 1
            for t in range(b - a):
                s = states[a + t]
                if stamp[s] != i:
                    stamp[s] = i
                    S[s] += G[t]
                    Q[s] += G[t] * G[t]
                    C[s] += 1
    return sums, sumsq, counts


def smooth_max_w(const long long[::1] counts, const double[::1] w, double beta):
    """max over 0 <= k <= max(counts) of exp(-k beta) * sum_s w_s / max(v_s - k, 1)^2."""
    cdef Py_ssize_t n = counts.shape[0], s
    cdef long long k, K = 0, best_k = 0
    cdef double phi, val, best = -1.0, r
    for s in range(n):
        if counts[s] > K:
            K = counts[s]
    with nogil:
        for k in range(K + 1):
            phi = 0.0
            for s in range(n):
                r = <double> (counts[s] - k)
                if r < 1.0:
                    r = 1.0
                phi += w[s] / (r * r)
            val = exp(-k * beta) * phi
            if val > best:
                best = val
                best_k = k
    return best, best_k, K


def smooth_max_lambda(const long long[::1] counts, const double[::1] rho, long long m,
                      double c_lam, double rho_norm2, double beta):
    """max over 0 <= k <= m of exp(-k beta) * (c * sqrt(sum_s rho_s min(v_s + k, m)) + |rho|_2)^2."""
    cdef Py_ssize_t n = counts.shape[0], s
    cdef long long k, best_k = 0, c
    cdef double acc, root, val, best = -1.0
    with nogil:
        for k in range(m + 1):
            acc = 0.0
            for s in range(n):
                c = counts[s] + k
                if c > m:
                    c = m
                acc += rho[s] * c
            root = c_lam * sqrt(acc) + rho_norm2
            val = exp(-k * beta) * root * root
            if val > best:
                best = val
                best_k = k
    return best, best_k, m
