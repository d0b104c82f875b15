"""Coarsening strategies, graph contraction and hierarchy construction."""

from __future__ import annotations

import json
import logging
import struct
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .community import WeightedGraph, louvain
from .graph import Graph, GraphError
from .rng import as_generator, kernel_seed

log = logging.getLogger(__name__)

STRATEGIES = ("anti", "random", "novel", "louvain")

MAP_MAGIC = b"MLCM"
MAP_VERSION = 1
ANTI_MIN_DRAWS = 8


class CoarsenError(GraphError):
    pass


@dataclass
class CoarsenConfig:
    strategy: str = "novel"
    use_ordering: bool = True
    use_hub_restriction: bool = True
    # hub threshold = hub_multiplier * |E| / |V|; 2.0 is the average degree
    hub_multiplier: float = 2.0
    max_depth: int = 15
    min_vertices: int = 100
    stop_threshold: float = 0.83
    seed: int = 0
    threads: int = 1
    louvain_passes: int = 32

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise CoarsenError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.max_depth < 1:
            raise CoarsenError("max_depth must be at least 1")
        if self.min_vertices < 1:
            raise CoarsenError("min_vertices must be at least 1")
        if not 0 < self.stop_threshold <= 1:
            raise CoarsenError("stop_threshold must lie in (0, 1]")
        if self.threads < 1:
            raise CoarsenError("threads must be at least 1")
        if self.hub_multiplier <= 0:
            raise CoarsenError("hub_multiplier must be positive")


@dataclass(eq=False)
class CoarseningMap:
    """``map[v]`` is the super-vertex of fine vertex ``v``.

    ``centers`` is filled by the novel strategy: ``centers[c]`` is the vertex
    that opened cluster ``c``.
    """

    map: np.ndarray
    coarse_count: int
    centers: np.ndarray | None = None

    def __len__(self):
        return len(self.map)

    def check(self) -> None:
        m = self.map
        if self.coarse_count > len(m):
            raise CoarsenError("more super-vertices than vertices")
        if len(m) == 0:
            if self.coarse_count:
                raise CoarsenError("empty map with super-vertices")
            return
        if m.min() < 0 or m.max() >= self.coarse_count:
            raise CoarsenError("map value out of range")
        if len(np.unique(m)) != self.coarse_count:
            raise CoarsenError("map is not surjective")

    def members(self) -> list[np.ndarray]:
        order = np.argsort(self.map, kind="stable")
        bounds = np.searchsorted(self.map[order], np.arange(self.coarse_count + 1))
        return [order[bounds[c] : bounds[c + 1]] for c in range(self.coarse_count)]

    def compose(self, coarser: "CoarseningMap") -> "CoarseningMap":
        """Map straight from this level's fine vertices to ``coarser``'s super-vertices."""
        if len(coarser.map) != self.coarse_count:
            raise CoarsenError("maps do not chain")
        return CoarseningMap(coarser.map[self.map], coarser.coarse_count)


@dataclass
class LevelStats:
    level: int
    vertices: int
    edges: int
    coarsen_ms: float


@dataclass
class Hierarchy:
    graphs: list[Graph]
    maps: list[CoarseningMap]
    per_level_stats: list[LevelStats] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.graphs)

    def stats_json(self) -> str:
        return json.dumps([asdict(s) for s in self.per_level_stats], indent=2)

    @classmethod
    def from_maps(cls, g: Graph, maps: list[CoarseningMap], threads: int = 1) -> "Hierarchy":
        """Rebuild the graph chain from saved maps."""
        graphs = [g]
        stats = [LevelStats(0, g.vertex_count, g.edge_count, 0.0)]
        for i, m in enumerate(maps):
            t0 = time.perf_counter()
            nxt = contract(graphs[-1], m, threads)
            graphs.append(nxt)
            stats.append(LevelStats(i + 1, nxt.vertex_count, nxt.edge_count,
                                    (time.perf_counter() - t0) * 1e3))
        return cls(graphs, list(maps), stats)


# --------------------------------------------------------------------------
# strategies


def hub_threshold(g: Graph, multiplier: float = 2.0) -> float:
    if g.vertex_count == 0:
        return 0.0
    return multiplier * g.edge_count / g.vertex_count


def processing_order(g: Graph, use_ordering: bool) -> np.ndarray:
    """Degree-descending (ties by ascending id) or plain id order."""
    if use_ordering:
        return np.argsort(-g.degrees(), kind="stable").astype(np.int32)
    return np.arange(g.vertex_count, dtype=np.int32)


def _require_vertices(g: Graph):
    if g.vertex_count < 1:
        raise CoarsenError("cannot coarsen an empty graph")


def coarsen_novel(g: Graph, cfg: CoarsenConfig | None = None, rng=None) -> CoarseningMap:
    """Greedy agglomeration around cluster centers (star clusters)."""
    cfg = cfg or CoarsenConfig()
    _require_vertices(g)
    n = g.vertex_count
    order = processing_order(g, cfg.use_ordering)
    threshold = hub_threshold(g, cfg.hub_multiplier)
    out = np.empty(n, dtype=np.int32)
    centers = np.empty(n, dtype=np.int32)
    if cfg.threads > 1:
        count = kernels.novel_sweep_parallel(
            g.offsets, g.neighbors, order, threshold, cfg.use_hub_restriction,
            cfg.threads, out, centers,
        )
    else:
        count = kernels.novel_sweep(
            g.offsets, g.neighbors, order, threshold, cfg.use_hub_restriction, out, centers
        )
    return CoarseningMap(out, int(count), centers[:count].copy())


def coarsen_random(g: Graph, rng=None) -> CoarseningMap:
    """Pair each unmapped vertex with a uniformly drawn unmapped vertex."""
    _require_vertices(g)
    rng = as_generator(rng)
    out = np.empty(g.vertex_count, dtype=np.int32)
    count = kernels.random_sweep(g.offsets, kernel_seed(rng), out)
    return CoarseningMap(out, int(count))


def coarsen_anti(g: Graph, rng=None) -> CoarseningMap:
    """Pair each unmapped vertex with a random unmapped non-neighbor."""
    _require_vertices(g)
    rng = as_generator(rng)
    out = np.empty(g.vertex_count, dtype=np.int32)
    count = kernels.anti_sweep(g.offsets, g.neighbors, kernel_seed(rng), ANTI_MIN_DRAWS, out)
    return CoarseningMap(out, int(count))


def coarsen_louvain(g: Graph, rng=None, max_passes: int = 32) -> CoarseningMap:
    """Communities of one Louvain phase on the unit-weight graph."""
    _require_vertices(g)
    p = louvain(WeightedGraph.from_graph(g), max_passes, as_generator(rng))
    return CoarseningMap(p.community.astype(np.int32), int(p.community_count))


def coarsen_once(g: Graph, cfg: CoarsenConfig, rng) -> CoarseningMap:
    if cfg.strategy == "novel":
        return coarsen_novel(g, cfg, rng)
    if cfg.strategy == "random":
        return coarsen_random(g, rng)
    if cfg.strategy == "anti":
        return coarsen_anti(g, rng)
    return coarsen_louvain(g, rng, cfg.louvain_passes)


def contract(g: Graph, m: CoarseningMap, threads: int = 1) -> Graph:
    """Coarse graph: one edge per connected super-vertex pair, no self-loops."""
    if len(m.map) != g.vertex_count:
        raise CoarsenError("map length does not match the graph")
    cmap = np.ascontiguousarray(m.map, dtype=np.int32)
    if len(cmap) and (cmap.min() < 0 or cmap.max() >= m.coarse_count):
        raise CoarsenError("map value out of range")
    offsets, nbrs = kernels.contract(g.offsets, g.neighbors, cmap, int(m.coarse_count), int(threads))
    return Graph(offsets, nbrs)


def build_hierarchy(g: Graph, cfg: CoarsenConfig | None = None, rng=None) -> Hierarchy:
    """Coarsen repeatedly until a depth, size or shrink limit is hit.

    A level whose shrink is insufficient (``|V_next| / |V| > stop_threshold``)
    is discarded; a level reaching ``min_vertices`` is kept and ends the run.
    """
    cfg = cfg or CoarsenConfig()
    _require_vertices(g)
    rng = as_generator(rng, cfg.seed)
    graphs = [g]
    maps: list[CoarseningMap] = []
    stats = [LevelStats(0, g.vertex_count, g.edge_count, 0.0)]
    while len(graphs) < cfg.max_depth:
        cur = graphs[-1]
        if cur.vertex_count <= cfg.min_vertices:
            break
        t0 = time.perf_counter()
        m = coarsen_once(cur, cfg, rng)
        if m.coarse_count / cur.vertex_count > cfg.stop_threshold:
            log.debug("level %d: shrink %d -> %d insufficient, stopping",
                      len(graphs), cur.vertex_count, m.coarse_count)
            break
        nxt = contract(cur, m, cfg.threads)
        elapsed = (time.perf_counter() - t0) * 1e3
        graphs.append(nxt)
        maps.append(m)
        stats.append(LevelStats(len(graphs) - 1, nxt.vertex_count, nxt.edge_count, elapsed))
        log.debug("level %d: %d vertices, %d edges (%.1f ms)",
                  len(graphs) - 1, nxt.vertex_count, nxt.edge_count, elapsed)
    return Hierarchy(graphs, maps, stats)


# --------------------------------------------------------------------------
# map files

_MAP_HEADER = struct.Struct("<4sIIIQQ")


def save_map(m: CoarseningMap, path, level: int) -> None:
    wide = m.coarse_count > 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(_MAP_HEADER.pack(MAP_MAGIC, MAP_VERSION, int(wide), level, len(m.map), m.coarse_count))
        fh.write(m.map.astype("<u8" if wide else "<u4").tobytes())


def load_map(path) -> tuple[CoarseningMap, int]:
    """Returns (map, level index)."""
    with open(path, "rb") as fh:
        head = fh.read(_MAP_HEADER.size)
        if len(head) < _MAP_HEADER.size:
            raise CoarsenError("truncated map header")
        magic, version, wide, level, n, c = _MAP_HEADER.unpack(head)
        if magic != MAP_MAGIC:
            raise CoarsenError("not a coarsening map file")
        if version != MAP_VERSION:
            raise CoarsenError(f"unsupported map version {version}")
        data = np.fromfile(fh, dtype="<u8" if wide else "<u4", count=n)
    if len(data) != n:
        raise CoarsenError("truncated map body")
    m = CoarseningMap(data.astype(np.int32), int(c))
    m.check()
    return m, level
