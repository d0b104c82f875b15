"""Synthetic stand-ins for the benchmark graphs, and lookup of real copies.

Two generators reproduce the size and the broad structure of the graphs the
acceptance suite is phrased in:

``coauthor_graph``
    collaboration network (com-dblp-like): papers with small author teams
    drawn mostly from one research community, each paper a clique.
    High clustering, heavy-tailed degrees.
``social_graph``
    friendship network (youtube-like): degree-corrected community model with
    power-law vertex propensities, a few huge hubs and close to half of the
    vertices pendant (degree 1).

Both keep only their largest connected component, like the published
versions of these graphs.

If a real copy of a graph is present in ``$MLEMBED_DATA_DIR`` it is used
instead (see ``load_named``).
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph import Graph, load_edge_list

REAL_FILES = {
    "com-dblp": ("com-dblp.ungraph.txt", "com-dblp.ungraph.txt.gz"),
    "youtube": ("youtube-links.txt", "youtube-links.txt.gz", "youtube.txt", "youtube.txt.gz"),
}

SIZES = {
    "com-dblp": (317_080, 1_049_866),
    "youtube": (1_138_499, 4_945_382),
}


def _power_law(rng, size, exponent, lo, hi):
    """Continuous power law on [lo, hi] with density ~ x^-exponent."""
    a = 1.0 - exponent
    u = rng.random(size)
    return (lo**a + u * (hi**a - lo**a)) ** (1.0 / a)


def _community_sampler(rng, members_by_comm_start, weights_sorted):
    cum = np.concatenate([[0.0], np.cumsum(weights_sorted)])

    def draw(comm_start, comm_end):
        lo = cum[comm_start]
        hi = cum[comm_end]
        r = lo + rng.random(len(lo)) * (hi - lo)
        idx = np.searchsorted(cum, r, side="right") - 1
        return np.clip(idx, comm_start, comm_end - 1)

    return draw


def _communities(rng, n, exponent, lo, hi):
    sizes = []
    total = 0
    while total < n:
        batch = _power_law(rng, 4096, exponent, lo, hi).astype(np.int64)
        for s in batch.tolist():
            sizes.append(min(s, n - total))
            total += sizes[-1]
            if total >= n:
                break
    starts = np.concatenate([[0], np.cumsum(sizes)])
    comm_of = np.repeat(np.arange(len(sizes)), sizes)
    return starts, comm_of


def _finish(n, keys, seed):
    """Keep the largest connected component, relabelled in random order."""
    rng = np.random.default_rng([seed, 99])
    u, v = np.divmod(keys, n)
    adj = sp.coo_matrix((np.ones(len(u), dtype=np.int8), (u, v)), shape=(n, n))
    _, label = connected_components(adj, directed=False)
    used = np.zeros(n, dtype=bool)
    used[u] = True
    biggest = np.argmax(np.bincount(label[used]))
    keep = label == biggest
    new = np.full(n, -1, dtype=np.int64)
    new[keep] = rng.permutation(int(keep.sum()))
    inside = keep[u]
    return Graph.from_edges(int(keep.sum()), new[u[inside]], new[v[inside]])


def coauthor_graph(n_authors=540_000, target_edges=1_049_866, seed=0, cross=0.04,
                   team_p=0.35, community_sizes=(8, 3000), max_activity=150.0) -> Graph:
    """Papers as author cliques; authors belong to power-law sized communities.

    Team sizes are 1 + Geometric(team_p) (at least 2, capped at 25); a
    ``cross`` share of author slots is filled from the whole population.
    """
    rng = np.random.default_rng([seed, 1])
    starts, comm_of = _communities(rng, n_authors, 2.0, *community_sizes)
    activity = _power_law(rng, n_authors, 2.3, 1.0, max_activity)
    draw_in = _community_sampler(rng, starts, activity)
    comm_weight = np.add.reduceat(activity, starts[:-1])
    comm_p = comm_weight / comm_weight.sum()
    glob_cum = np.cumsum(activity) / activity.sum()
    keys = np.zeros(0, dtype=np.int64)
    while len(keys) < target_edges:
        papers = 200_000
        team = np.minimum(1 + rng.geometric(team_p, papers), 25)
        comm = rng.choice(len(comm_p), size=papers, p=comm_p)
        slot_comm = np.repeat(comm, team)
        authors = draw_in(starts[slot_comm], starts[slot_comm + 1])
        outside = rng.random(len(authors)) < cross
        authors[outside] = np.searchsorted(glob_cum, rng.random(outside.sum()))
        bounds = np.concatenate([[0], np.cumsum(team)])
        new = []
        for k in np.unique(team):
            sel = np.flatnonzero(team == k)
            block = authors[bounds[sel][:, None] + np.arange(k)]
            iu, ju = np.triu_indices(k, 1)
            a, b = block[:, iu].ravel(), block[:, ju].ravel()
            ok = a != b
            lo, hi = np.minimum(a, b)[ok], np.maximum(a, b)[ok]
            new.append(lo * n_authors + hi)
        keys = np.union1d(keys, np.concatenate(new))
    if len(keys) > target_edges:
        keys = np.sort(rng.choice(keys, target_edges, replace=False))
    return _finish(n_authors, keys, seed)


def social_graph(n=1_146_000, target_edges=4_945_382, seed=0, mixing=0.25,
                 exponent=2.0, max_theta=30_000.0, leaf_fraction=0.45, leaf_bias=1.5) -> Graph:
    """Degree-corrected community core plus pendant vertices.

    A ``leaf_fraction`` share of the vertices gets exactly one edge, to a
    core vertex picked in proportion to propensity**leaf_bias (pendants
    cluster on hubs, so few are cut off by a split); the remaining edge
    budget is spread over the core, ``1 - mixing`` of it inside communities.
    """
    rng = np.random.default_rng([seed, 2])
    n_leaf = int(leaf_fraction * n)
    n_core = n - n_leaf
    core_edges = target_edges - n_leaf
    starts, comm_of = _communities(rng, n_core, 1.8, 10, 2000)
    theta = _power_law(rng, n_core, exponent, 1.0, max_theta)
    draw_in = _community_sampler(rng, starts, theta)
    glob_cum = np.cumsum(theta) / theta.sum()
    keys = np.zeros(0, dtype=np.int64)
    while len(keys) < core_edges:
        batch = int(1.1 * (core_edges - len(keys))) + 1000
        u = np.searchsorted(glob_cum, rng.random(batch))
        v = np.searchsorted(glob_cum, rng.random(batch))
        local = rng.random(batch) >= mixing
        cu = comm_of[u[local]]
        v[local] = draw_in(starts[cu], starts[cu + 1])
        ok = u != v
        lo, hi = np.minimum(u, v)[ok], np.maximum(u, v)[ok]
        keys = np.union1d(keys, lo * n + hi)
    keys = rng.choice(keys, core_edges, replace=False)
    host_w = theta**leaf_bias
    hosts = np.searchsorted(np.cumsum(host_w) / host_w.sum(), rng.random(n_leaf))
    leaves = np.arange(n_core, n, dtype=np.int64)
    return _finish(n, np.concatenate([keys, hosts * n + leaves]), seed)


def find_real(name: str, data_dir=None):
    data_dir = data_dir or os.environ.get("MLEMBED_DATA_DIR")
    if not data_dir:
        return None
    for fname in REAL_FILES.get(name, ()):
        path = os.path.join(data_dir, fname)
        if os.path.exists(path):
            return path
    return None


def synthetic(name: str, seed: int = 0) -> tuple[Graph, str]:
    if name == "com-dblp":
        return coauthor_graph(seed=seed), "synthetic:coauthor"
    if name == "youtube":
        return social_graph(seed=seed), "synthetic:social"
    raise KeyError(f"no graph named {name!r}")


def load_named(name: str, seed: int = 0, data_dir=None) -> tuple[Graph, str]:
    """Real graph if available, else its synthetic stand-in; returns (graph, source)."""
    path = find_real(name, data_dir)
    if path:
        g, _ = load_edge_list(path)
        return g, path
    return synthetic(name, seed)
