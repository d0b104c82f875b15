# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, nonecheck=False
"""Compiled hot loops.

Every function here has a drop-in twin in ``mlembed._pykernels``; callers go
through ``mlembed.kernels`` which picks one at import time.  Integer kernels
(coarsening sweeps, contraction, Louvain moves) produce identical output on
both backends; float kernels agree to rounding.
"""

import numpy as np

from cython.parallel cimport prange
from libc.math cimport exp
from libc.stdint cimport int32_t, int64_t, uint64_t
from libcpp.algorithm cimport sort

cdef extern from "_kernel_support.h" nogil:
    uint64_t sm_next(uint64_t *state)
    uint64_t sm_below(uint64_t *state, uint64_t n)
    uint64_t sm_thread_seed(uint64_t seed, int tid)
    bint cas_i32(int32_t *ptr, int32_t expected, int32_t desired)
    int32_t load_i32(const int32_t *ptr)
    void prefetch_row(const float *row, int64_t length)
    const int MLEMBED_HAVE_OPENMP
    int mlembed_max_threads()

cdef extern from *:
    """
    #ifdef _OPENMP
    #include <omp.h>
    static inline int mlembed_tid(int cap) { int t = omp_get_thread_num(); return t < cap ? t : 0; }
    #else
    static inline int mlembed_tid(int cap) { return 0; }
    #endif
    """
    int _tid "mlembed_tid"(int cap) nogil

BACKEND = "compiled"
HAVE_OPENMP = bool(MLEMBED_HAVE_OPENMP)


def max_threads():
    return mlembed_max_threads()


cdef inline double sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


# ---------------------------------------------------------------- coarsening

def novel_sweep(const int64_t[::1] offsets, const int32_t[::1] nbrs,
                const int32_t[::1] order, double threshold, bint hub_rule,
                int32_t[::1] out_map, int32_t[::1] centers):
    cdef Py_ssize_t n = offsets.shape[0] - 1, k
    cdef int64_t j
    cdef int32_t v, u, cid = 0
    cdef bint v_hub
    with nogil:
        for k in range(n):
            out_map[k] = -1
        for k in range(n):
            v = order[k]
            if out_map[v] != -1:
                continue
            out_map[v] = cid
            centers[cid] = v
            v_hub = hub_rule and (offsets[v + 1] - offsets[v]) > threshold
            for j in range(offsets[v], offsets[v + 1]):
                u = nbrs[j]
                if out_map[u] != -1:
                    continue
                if v_hub and (offsets[u + 1] - offsets[u]) > threshold:
                    continue
                out_map[u] = cid
            cid += 1
    return cid


def novel_sweep_parallel(const int64_t[::1] offsets, const int32_t[::1] nbrs,
                         const int32_t[::1] order, double threshold, bint hub_rule,
                         int threads, int32_t[::1] out_map, int32_t[::1] centers):
    """Vertices are claimed by CAS on ``out_map`` (-1 -> center id)."""
    cdef Py_ssize_t n = offsets.shape[0] - 1, k
    cdef int64_t j
    cdef int32_t v, u, cid = 0
    cdef bint v_hub
    cdef int32_t[::1] newid = np.empty(n, dtype=np.int32)
    with nogil:
        for k in prange(n, num_threads=threads, schedule="static"):
            out_map[k] = -1
        for k in prange(n, num_threads=threads, schedule="dynamic", chunksize=256):
            v = order[k]
            if load_i32(&out_map[v]) != -1:
                continue
            if not cas_i32(&out_map[v], -1, v):
                continue
            v_hub = hub_rule and (offsets[v + 1] - offsets[v]) > threshold
            for j in range(offsets[v], offsets[v + 1]):
                u = nbrs[j]
                if load_i32(&out_map[u]) != -1:
                    continue
                if v_hub and (offsets[u + 1] - offsets[u]) > threshold:
                    continue
                cas_i32(&out_map[u], -1, v)
        # compact: cluster ids follow the centers' position in the processing order
        for k in range(n):
            v = order[k]
            if out_map[v] == v:
                newid[v] = cid
                centers[cid] = v
                cid += 1
        for k in prange(n, num_threads=threads, schedule="static"):
            out_map[k] = newid[out_map[k]]
    return cid


def random_sweep(const int64_t[::1] offsets, uint64_t seed, int32_t[::1] out_map):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef int32_t v, u, cid = 0
    cdef int64_t t, budget
    cdef uint64_t state = seed
    with nogil:
        for v in range(n):
            out_map[v] = -1
        for v in range(n):
            if out_map[v] != -1:
                continue
            out_map[v] = cid
            budget = offsets[v + 1] - offsets[v]
            for t in range(budget):
                u = <int32_t>sm_below(&state, n)
                if u != v and out_map[u] == -1:
                    out_map[u] = cid
                    break
            cid += 1
    return cid


def anti_sweep(const int64_t[::1] offsets, const int32_t[::1] nbrs, uint64_t seed,
               int min_draws, int32_t[::1] out_map):
    """Pair each unmapped vertex with a random unmapped non-neighbor."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef int32_t v, u, last, cid = 0
    cdef int64_t t, budget, i, size = n
    cdef uint64_t state = seed
    cdef int32_t[::1] pool = np.arange(n, dtype=np.int32)
    cdef int32_t[::1] pos = np.arange(n, dtype=np.int32)
    with nogil:
        for v in range(n):
            out_map[v] = -1
        for v in range(n):
            if out_map[v] != -1:
                continue
            i = pos[v]
            last = pool[size - 1]
            pool[i] = last
            pos[last] = <int32_t>i
            size -= 1
            out_map[v] = cid
            budget = offsets[v + 1] - offsets[v]
            if budget < min_draws:
                budget = min_draws
            for t in range(budget):
                if size == 0:
                    break
                u = pool[sm_below(&state, size)]
                if _has_neighbor(offsets, nbrs, v, u):
                    continue
                out_map[u] = cid
                i = pos[u]
                last = pool[size - 1]
                pool[i] = last
                pos[last] = <int32_t>i
                size -= 1
                break
            cid += 1
    return cid


cdef inline bint _has_neighbor(const int64_t[::1] offsets, const int32_t[::1] nbrs,
                               int32_t v, int32_t x) noexcept nogil:
    cdef int64_t lo = offsets[v], hi = offsets[v + 1], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if nbrs[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < offsets[v + 1] and nbrs[lo] == x


def contract(const int64_t[::1] offsets, const int32_t[::1] nbrs,
             const int32_t[::1] cmap, int32_t coarse_count, int threads):
    """Coarse CSR (offsets, neighbors) with self-loops and parallel edges removed."""
    cdef Py_ssize_t n = offsets.shape[0] - 1, v
    cdef int32_t x, y, w, tid
    cdef int64_t a, b, j, cnt, start
    if threads < 1:
        threads = 1
    member_off_np = np.zeros(coarse_count + 1, dtype=np.int64)
    cdef int64_t[::1] member_off = member_off_np
    cdef int32_t[::1] members = np.empty(n, dtype=np.int32)
    cdef int64_t[::1] cursor
    cdef int64_t[::1] counts = np.zeros(coarse_count, dtype=np.int64)
    cdef int32_t[:, ::1] marker = np.full((threads, max(coarse_count, 1)), -1, dtype=np.int32)

    for v in range(n):
        member_off[cmap[v] + 1] += 1
    np.cumsum(member_off_np, out=member_off_np)
    cursor = member_off_np[:-1].copy()
    for v in range(n):
        x = cmap[v]
        members[cursor[x]] = <int32_t>v
        cursor[x] += 1

    with nogil:
        for x in prange(coarse_count, num_threads=threads, schedule="dynamic", chunksize=64):
            tid = _tid(threads)
            cnt = 0
            for a in range(member_off[x], member_off[x + 1]):
                w = members[a]
                for j in range(offsets[w], offsets[w + 1]):
                    y = cmap[nbrs[j]]
                    if y != x and marker[tid, y] != x:
                        marker[tid, y] = x
                        cnt = cnt + 1
            counts[x] = cnt

    new_off_np = np.zeros(coarse_count + 1, dtype=np.int64)
    np.cumsum(counts, out=new_off_np[1:])
    cdef int64_t[::1] new_off = new_off_np
    out_np = np.empty(new_off_np[coarse_count], dtype=np.int32)
    cdef int32_t[::1] out = out_np
    marker[:, :] = -1

    with nogil:
        for x in prange(coarse_count, num_threads=threads, schedule="dynamic", chunksize=64):
            tid = _tid(threads)
            start = new_off[x]
            cnt = 0
            for a in range(member_off[x], member_off[x + 1]):
                w = members[a]
                for j in range(offsets[w], offsets[w + 1]):
                    y = cmap[nbrs[j]]
                    if y != x and marker[tid, y] != x:
                        marker[tid, y] = x
                        out[start + cnt] = y
                        cnt = cnt + 1
            if cnt > 1:
                sort(&out[start], &out[start] + cnt)
    return new_off_np, out_np




# ---------------------------------------------------------------- embedding

cdef inline float lane_dot(const float *a, const float *b, Py_ssize_t d) noexcept nogil:
    # eight running sums (lane j % 8), folded pairwise; the order is fixed so
    # the pure-Python twin can reproduce it bit for bit
    cdef float a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0
    cdef Py_ssize_t j = 0, full = d - d % 8
    while j < full:
        a0 = a0 + a[j] * b[j]
        a1 = a1 + a[j + 1] * b[j + 1]
        a2 = a2 + a[j + 2] * b[j + 2]
        a3 = a3 + a[j + 3] * b[j + 3]
        a4 = a4 + a[j + 4] * b[j + 4]
        a5 = a5 + a[j + 5] * b[j + 5]
        a6 = a6 + a[j + 6] * b[j + 6]
        a7 = a7 + a[j + 7] * b[j + 7]
        j += 8
    if j < d:
        a0 = a0 + a[j] * b[j]
    if j + 1 < d:
        a1 = a1 + a[j + 1] * b[j + 1]
    if j + 2 < d:
        a2 = a2 + a[j + 2] * b[j + 2]
    if j + 3 < d:
        a3 = a3 + a[j + 3] * b[j + 3]
    if j + 4 < d:
        a4 = a4 + a[j + 4] * b[j + 4]
    if j + 5 < d:
        a5 = a5 + a[j + 5] * b[j + 5]
    if j + 6 < d:
        a6 = a6 + a[j + 6] * b[j + 6]
    return ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))


DEF MAX_NEGATIVES = 64
DEF LOOKAHEAD = 4


def sgd_epoch(float[:, ::1] M, const int32_t[::1] src, const int32_t[::1] dst,
              const int64_t[::1] perm, double lr_start, double lr_end,
              int64_t step_offset, int64_t total_steps, int negatives,
              uint64_t seed, int threads):
    """One pass over ``perm``; blocks of the permutation go to lock-free workers.

    Per update the RNG yields the orientation bit, then the negatives.
    """
    cdef Py_ssize_t n_upd = perm.shape[0], d = M.shape[1]
    cdef uint64_t n_rows = M.shape[0]
    cdef int t, s
    cdef int64_t k, lo, hi, e
    cdef int32_t u, v
    cdef int32_t neg[MAX_NEGATIVES]
    cdef uint64_t state, r
    cdef Py_ssize_t j
    cdef float dot, tmp, g
    cdef double lr, span = lr_end - lr_start
    cdef float *mu
    cdef float *mv
    cdef float *mw
    if negatives > MAX_NEGATIVES:
        raise ValueError(f"at most {MAX_NEGATIVES} negative samples are supported")
    if threads < 1:
        threads = 1
    with nogil:
        for t in prange(threads, num_threads=threads, schedule="static", chunksize=1):
            lo = (n_upd * t) // threads
            hi = (n_upd * (t + 1)) // threads
            state = sm_thread_seed(seed, t)
            for k in range(lo, hi):
                if k + LOOKAHEAD < hi:
                    e = perm[k + LOOKAHEAD]
                    prefetch_row(&M[src[e], 0], d)
                    prefetch_row(&M[dst[e], 0], d)
                e = perm[k]
                r = sm_next(&state)
                if r & 1:
                    u = src[e]
                    v = dst[e]
                else:
                    u = dst[e]
                    v = src[e]
                for s in range(negatives):
                    neg[s] = <int32_t>sm_below(&state, n_rows)
                    prefetch_row(&M[neg[s], 0], d)
                lr = lr_start + span * (<double>(step_offset + k) / <double>total_steps)
                mu = &M[u, 0]
                mv = &M[v, 0]
                dot = lane_dot(mu, mv, d)
                g = <float>(lr * (1.0 - sigmoid(dot)))
                for j in range(d):
                    tmp = mu[j]
                    mu[j] = mu[j] + g * mv[j]
                    mv[j] = mv[j] + g * tmp
                for s in range(negatives):
                    mw = &M[neg[s], 0]
                    dot = lane_dot(mu, mw, d)
                    g = <float>(-lr * sigmoid(dot))
                    for j in range(d):
                        mu[j] = mu[j] + g * mw[j]


# ---------------------------------------------------------------- evaluation

def logreg_epoch(const float[:, ::1] X, const double[::1] y, const int64_t[::1] perm,
                 double[::1] w, double[::1] b, double lr, double l2):
    cdef Py_ssize_t n = perm.shape[0], d = X.shape[1], j
    cdef int64_t k, i
    cdef double z, g
    with nogil:
        for k in range(n):
            i = perm[k]
            z = b[0]
            for j in range(d):
                z = z + w[j] * X[i, j]
            g = sigmoid(z) - y[i]
            for j in range(d):
                w[j] = w[j] - lr * (g * X[i, j] + l2 * w[j])
            b[0] = b[0] - lr * g


# ---------------------------------------------------------------- community

def louvain_sweep(const int64_t[::1] offsets, const int32_t[::1] nbrs,
                  const double[::1] weights, const double[::1] kdeg,
                  int32_t[::1] comm, double[::1] tot, const int32_t[::1] order,
                  double m):
    """One local-move sweep; returns the number of vertices that changed community."""
    cdef Py_ssize_t n = offsets.shape[0] - 1, idx, t, nt
    cdef int64_t j
    cdef int32_t i, c, x, best
    cdef double ki, gain, best_gain, two_m = 2.0 * m
    cdef double[::1] neigh_w = np.zeros(n, dtype=np.float64)
    cdef int64_t[::1] stamp = np.zeros(n, dtype=np.int64)
    cdef int32_t[::1] touched = np.empty(n, dtype=np.int32)
    cdef int64_t moved = 0
    with nogil:
        for idx in range(n):
            i = order[idx]
            c = comm[i]
            ki = kdeg[i]
            nt = 0
            for j in range(offsets[i], offsets[i + 1]):
                x = comm[nbrs[j]]
                if stamp[x] != idx + 1:
                    stamp[x] = idx + 1
                    neigh_w[x] = 0.0
                    touched[nt] = x
                    nt += 1
                neigh_w[x] += weights[j]
            tot[c] -= ki
            best = c
            best_gain = (neigh_w[c] if stamp[c] == idx + 1 else 0.0) - tot[c] * ki / two_m
            for t in range(nt):
                x = touched[t]
                if x == c:
                    continue
                gain = neigh_w[x] - tot[x] * ki / two_m
                if gain > best_gain or (gain == best_gain and best != c and x < best):
                    best = x
                    best_gain = gain
            tot[best] += ki
            if best != c:
                comm[i] = best
                moved += 1
    return moved


def logreg_pairs_epoch(const float[:, ::1] M, const int64_t[:, ::1] pairs,
                       const double[::1] y, const int64_t[::1] perm,
                       double[::1] w, double[::1] b, double lr, double l2):
    """Same as ``logreg_epoch`` with Hadamard rows built on the fly."""
    cdef Py_ssize_t n = perm.shape[0], d = M.shape[1], j
    cdef int64_t k, i, u, v
    cdef double z, g, x
    with nogil:
        for k in range(n):
            i = perm[k]
            u = pairs[i, 0]
            v = pairs[i, 1]
            z = b[0]
            for j in range(d):
                z = z + w[j] * <float>(M[u, j] * M[v, j])
            g = sigmoid(z) - y[i]
            for j in range(d):
                x = <float>(M[u, j] * M[v, j])
                w[j] = w[j] - lr * (g * x + l2 * w[j])
            b[0] = b[0] - lr * g
