"""Pure-Python twins of the compiled kernels in ``_ckernels.pyx``.

Used when the extension is unavailable (or ``MLEMBED_PURE_PYTHON=1``).
They follow the compiled loops statement by statement, including the
splitmix64 draws, so integer results match exactly.  ``threads`` is
accepted and ignored: everything here runs sequentially.
"""

import math

import numpy as np

from .rng import MASK64, below, splitmix64, thread_seed

BACKEND = "python"
HAVE_OPENMP = False


def max_threads():
    return 1


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def novel_sweep(offsets, nbrs, order, threshold, hub_rule, out_map, centers):
    off = offsets.tolist()
    nb = nbrs.tolist()
    n = len(off) - 1
    cmap = [-1] * n
    cid = 0
    for v in order.tolist():
        if cmap[v] != -1:
            continue
        cmap[v] = cid
        centers[cid] = v
        v_hub = hub_rule and (off[v + 1] - off[v]) > threshold
        for j in range(off[v], off[v + 1]):
            u = nb[j]
            if cmap[u] != -1:
                continue
            if v_hub and (off[u + 1] - off[u]) > threshold:
                continue
            cmap[u] = cid
        cid += 1
    out_map[:] = cmap
    return cid


def novel_sweep_parallel(offsets, nbrs, order, threshold, hub_rule, threads, out_map, centers):
    # a single worker claims vertices in processing order, which is exactly
    # the sequential sweep
    return novel_sweep(offsets, nbrs, order, threshold, hub_rule, out_map, centers)


def random_sweep(offsets, seed, out_map):
    off = offsets.tolist()
    n = len(off) - 1
    cmap = [-1] * n
    state = seed & MASK64
    cid = 0
    for v in range(n):
        if cmap[v] != -1:
            continue
        cmap[v] = cid
        for _ in range(off[v + 1] - off[v]):
            state, out = splitmix64(state)
            u = below(out, n)
            if u != v and cmap[u] == -1:
                cmap[u] = cid
                break
        cid += 1
    out_map[:] = cmap
    return cid


def anti_sweep(offsets, nbrs, seed, min_draws, out_map):
    off = offsets.tolist()
    nb = nbrs.tolist()
    n = len(off) - 1
    cmap = [-1] * n
    pool = list(range(n))
    pos = list(range(n))
    size = n
    state = seed & MASK64
    cid = 0

    def remove(x):
        nonlocal size
        i = pos[x]
        last = pool[size - 1]
        pool[i] = last
        pos[last] = i
        size -= 1

    for v in range(n):
        if cmap[v] != -1:
            continue
        remove(v)
        cmap[v] = cid
        row = set(nb[off[v] : off[v + 1]])
        for _ in range(max(off[v + 1] - off[v], min_draws)):
            if size == 0:
                break
            state, out = splitmix64(state)
            u = pool[below(out, size)]
            if u in row:
                continue
            cmap[u] = cid
            remove(u)
            break
        cid += 1
    out_map[:] = cmap
    return cid


def contract(offsets, nbrs, cmap, coarse_count, threads):
    n = len(offsets) - 1
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
    cs = cmap[src].astype(np.int64)
    cd = cmap[nbrs].astype(np.int64)
    keep = cs != cd
    keys = np.unique(cs[keep] * coarse_count + cd[keep])
    rows, cols = np.divmod(keys, coarse_count)
    new_off = np.zeros(coarse_count + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=coarse_count), out=new_off[1:])
    return new_off, cols.astype(np.int32)


def lane_dot(a, b):
    """Float32 dot product accumulated in the compiled kernel's lane order."""
    prod = a * b
    acc = [np.float32(0)] * 8
    for k in range(8):
        lane = prod[k::8]
        if len(lane):
            acc[k] = np.cumsum(lane, dtype=np.float32)[-1]
    return float(((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])))


def sgd_epoch(M, src, dst, perm, lr_start, lr_end, step_offset, total_steps, negatives, seed, threads):
    n_rows = M.shape[0]
    span = lr_end - lr_start
    threads = max(int(threads), 1)
    n_upd = len(perm)
    for t in range(threads):
        lo = (n_upd * t) // threads
        hi = (n_upd * (t + 1)) // threads
        state = thread_seed(seed, t)
        for k in range(lo, hi):
            e = perm[k]
            state, r = splitmix64(state)
            if r & 1:
                u, v = src[e], dst[e]
            else:
                u, v = dst[e], src[e]
            lr = lr_start + span * ((step_offset + k) / total_steps)
            mu = M[u]
            mv = M[v]
            g = np.float32(lr * (1.0 - _sigmoid(lane_dot(mu, mv))))
            old_u = mu.copy()
            mu += g * mv
            mv += g * old_u
            for _ in range(negatives):
                state, out = splitmix64(state)
                mw = M[below(out, n_rows)]
                g = np.float32(-lr * _sigmoid(lane_dot(mu, mw)))
                mu += g * mw


def logreg_epoch(X, y, perm, w, b, lr, l2):
    for i in perm.tolist():
        x = X[i].astype(np.float64)
        z = b[0] + float(np.dot(w, x))
        g = _sigmoid(z) - y[i]
        w -= lr * (g * x + l2 * w)
        b[0] -= lr * g


def logreg_pairs_epoch(M, pairs, y, perm, w, b, lr, l2):
    for i in perm.tolist():
        u, v = pairs[i]
        x = (M[u] * M[v]).astype(np.float64)
        z = b[0] + float(np.dot(w, x))
        g = _sigmoid(z) - y[i]
        w -= lr * (g * x + l2 * w)
        b[0] -= lr * g


def louvain_sweep(offsets, nbrs, weights, kdeg, comm, tot, order, m):
    off = offsets.tolist()
    nb = nbrs.tolist()
    wt = weights.tolist()
    cm = comm.tolist()
    tt = tot.tolist()
    kd = kdeg.tolist()
    two_m = 2.0 * m
    moved = 0
    for i in order.tolist():
        c = cm[i]
        ki = kd[i]
        neigh = {}
        for j in range(off[i], off[i + 1]):
            x = cm[nb[j]]
            neigh[x] = neigh.get(x, 0.0) + wt[j]
        tt[c] -= ki
        best = c
        best_gain = neigh.get(c, 0.0) - tt[c] * ki / two_m
        for x, w_in in neigh.items():
            if x == c:
                continue
            gain = w_in - tt[x] * ki / two_m
            if gain > best_gain or (gain == best_gain and best != c and x < best):
                best = x
                best_gain = gain
        tt[best] += ki
        if best != c:
            cm[i] = best
            moved += 1
    comm[:] = cm
    tot[:] = tt
    return moved
