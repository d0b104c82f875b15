"""Louvain-style modularity optimization.

Modularity of a partition::

    Q = (1/2m) * sum_j e(j -> C(j)) - sum_C (a_C / 2m)^2

``e(j -> C(j))`` is the weight from ``j`` into its own community, with each
undirected intra-community edge counted once from each endpoint and a
self-loop of weight ``w`` counted as ``2w``; ``a_C`` sums the weighted
degrees (self-loop contributes ``2w``) of the community and
``m = sum(edge weights) + sum(self-loop weights)``.  Under this convention
collapsing every community into one vertex with a self-loop preserves Q,
which is what a multi-phase Louvain relies on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .graph import Graph, GraphError
from .rng import as_generator


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    offsets: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray
    self_weights: np.ndarray

    def __post_init__(self):
        for name, dtype in (
            ("offsets", np.int64),
            ("neighbors", np.int32),
            ("weights", np.float64),
            ("self_weights", np.float64),
        ):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=dtype))
        if len(self.weights) != len(self.neighbors):
            raise GraphError("one weight per adjacency entry required")
        if len(self.self_weights) != self.vertex_count:
            raise GraphError("one self weight per vertex required")
        if np.any(self.weights <= 0) or np.any(self.self_weights < 0):
            raise GraphError("edge weights must be positive, self weights non-negative")

    @classmethod
    def from_graph(cls, g: Graph) -> "WeightedGraph":
        return cls(
            g.offsets,
            g.neighbors,
            np.ones(len(g.neighbors)),
            np.zeros(g.vertex_count),
        )

    @property
    def vertex_count(self) -> int:
        return len(self.offsets) - 1

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum() / 2 + self.self_weights.sum())

    def weighted_degrees(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.vertex_count), np.diff(self.offsets))
        k = np.bincount(rows, weights=self.weights, minlength=self.vertex_count)
        return k + 2 * self.self_weights

    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.vertex_count, dtype=np.int32), np.diff(self.offsets))


@dataclass(frozen=True, eq=False)
class Partition:
    community: np.ndarray
    community_count: int

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(np.arange(n, dtype=np.int32), n)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Dense re-labelling in order of first appearance."""
        labels = np.asarray(labels)
        _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(len(first), dtype=np.int32)
        rank[np.argsort(first, kind="stable")] = np.arange(len(first), dtype=np.int32)
        return cls(rank[inverse.ravel()], len(first))

    def to_json(self) -> str:
        return json.dumps(self.community.tolist())


def modularity(wg: WeightedGraph, p: Partition) -> float:
    comm = np.asarray(p.community)
    if len(comm) != wg.vertex_count:
        raise GraphError("partition length does not match the graph")
    m = wg.total_weight
    if m <= 0:
        raise GraphError("modularity is undefined for a graph without edge weight")
    src = wg.sources()
    intra = wg.weights[comm[src] == comm[wg.neighbors]].sum() + 2 * wg.self_weights.sum()
    a = np.bincount(comm, weights=wg.weighted_degrees())
    return float(intra / (2 * m) - np.sum((a / (2 * m)) ** 2))


def move_gain(wg: WeightedGraph, p: Partition, v: int, target: int) -> float:
    """Modularity change from moving ``v`` alone into community ``target``."""
    comm = np.asarray(p.community)
    m = wg.total_weight
    k = wg.weighted_degrees()
    lo, hi = wg.offsets[v], wg.offsets[v + 1]
    nbr_comm = comm[wg.neighbors[lo:hi]]
    w = wg.weights[lo:hi]
    own = comm[v]
    if target == own:
        return 0.0
    into_target = w[nbr_comm == target].sum()
    into_own = w[nbr_comm == own].sum()
    tot_own = k[comm == own].sum() - k[v]
    tot_target = k[comm == target].sum()
    return float((into_target - into_own) / m - k[v] * (tot_target - tot_own) / (2 * m * m))


def louvain_local_move(wg: WeightedGraph, p: Partition, rng=None) -> tuple[Partition, int]:
    """One randomized-order sweep of greedy single-vertex moves."""
    rng = as_generator(rng)
    m = wg.total_weight
    if m <= 0:
        return p, 0
    comm = np.array(p.community, dtype=np.int32)
    k = wg.weighted_degrees()
    tot = np.bincount(comm, weights=k, minlength=max(p.community_count, wg.vertex_count))
    order = rng.permutation(wg.vertex_count).astype(np.int32)
    moved = kernels.louvain_sweep(
        wg.offsets, wg.neighbors, wg.weights, k, comm, tot, order, m
    )
    return Partition.from_labels(comm), int(moved)


def louvain(wg: WeightedGraph, max_passes: int = 32, rng=None) -> Partition:
    """Single Louvain phase: local-move sweeps until nothing moves."""
    if max_passes < 1:
        raise ValueError("max_passes must be at least 1")
    rng = as_generator(rng)
    p = Partition.singletons(wg.vertex_count)
    for _ in range(max_passes):
        p, moved = louvain_local_move(wg, p, rng)
        if moved == 0:
            break
    return p


def aggregate(wg: WeightedGraph, p: Partition) -> WeightedGraph:
    """Collapse communities into vertices; internal weight becomes a self-loop."""
    comm = np.asarray(p.community, dtype=np.int64)
    c = p.community_count
    src = comm[wg.sources()]
    dst = comm[wg.neighbors]
    internal = src == dst
    self_w = np.bincount(comm, weights=wg.self_weights, minlength=c)
    self_w += np.bincount(src[internal], weights=wg.weights[internal], minlength=c) / 2
    keys, inverse = np.unique(src[~internal] * c + dst[~internal], return_inverse=True)
    w = np.bincount(inverse.ravel(), weights=wg.weights[~internal], minlength=len(keys))
    rows, cols = np.divmod(keys, c)
    offsets = np.zeros(c + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=c), out=offsets[1:])
    return WeightedGraph(offsets, cols, w, self_w)
