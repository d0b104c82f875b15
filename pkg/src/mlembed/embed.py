"""Multi-level embedding: epoch schedule, per-level SGD and projection."""

from __future__ import annotations

import logging
import math
import struct
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coarsen import CoarseningMap, Hierarchy
from .graph import Graph
from .rng import as_generator, kernel_seed

log = logging.getLogger(__name__)

EMBED_MAGIC = b"MLEM"
EMBED_VERSION = 1


class TrainingError(RuntimeError):
    def __init__(self, message, level=None, epoch=None):
        self.level = level
        self.epoch = epoch
        super().__init__(message)


@dataclass(frozen=True)
class EpochSchedule:
    per_level: tuple[int, ...]
    total: int


@dataclass
class TrainConfig:
    dim: int = 128
    epochs: int = 1000
    smoothing: float = 0.3
    learning_rate: float = 0.035
    negative_samples: int = 3
    seed: int = 0
    threads: int = 1
    lr_floor_fraction: float = 0.1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.negative_samples < 0:
            raise ValueError("negative_samples must be non-negative")
        if not 0 <= self.smoothing < 1:
            raise ValueError("smoothing must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


def _round(x: float) -> int:
    return math.floor(x + 0.5)


def distribute_epochs(e: int, p: float, D: int) -> EpochSchedule:
    """Split ``e`` epochs over ``D`` levels (index 0 = original graph).

    A share ``p`` is spread evenly; the rest is geometric, each level getting
    half of the next coarser one.  Rounding residue goes to the coarsest
    level and every level keeps at least one epoch.
    """
    if D < 1:
        raise ValueError("need at least one level")
    if not 0 <= p < 1:
        raise ValueError("smoothing p must lie in [0, 1)")
    if e < D:
        raise ValueError(f"{e} epochs cannot cover {D} levels")
    uniform = p * e / D
    top = (1 - p) * e / (2 - 2.0 ** (1 - D))
    geometric = [top / 2.0 ** (D - 1 - i) for i in range(D)]
    per = [_round(uniform) + _round(g) for g in geometric]
    per[-1] += e - sum(per)
    while min(per) < 1:
        per[per.index(max(per))] -= 1
        per[per.index(min(per))] += 1
    return EpochSchedule(tuple(per), e)


def init_embedding(rows: int, dim: int, rng=None) -> np.ndarray:
    rng = as_generator(rng)
    half = 0.5 / dim
    return rng.uniform(-half, half, size=(rows, dim)).astype(np.float32)


def train_level(g: Graph, M: np.ndarray, epochs: int, lr_start: float,
                cfg: TrainConfig, rng=None, level: int = 0) -> np.ndarray:
    """Run ``epochs`` passes of edge-sampling SGD on ``M`` in place.

    Each pass visits every edge once in random order; the learning rate
    falls linearly across all of the level's updates to
    ``lr_start * cfg.lr_floor_fraction``.
    """
    if M.shape[0] != g.vertex_count:
        raise ValueError("embedding rows do not match the graph")
    if M.dtype != np.float32 or not M.flags.c_contiguous:
        raise ValueError("embedding must be a C-contiguous float32 matrix")
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    rng = as_generator(rng)
    src, dst = g.edges()
    n_edges = len(src)
    if epochs == 0 or n_edges == 0:
        return M
    total = epochs * n_edges
    lr_end = lr_start * cfg.lr_floor_fraction
    for epoch in range(epochs):
        perm = rng.permutation(n_edges)
        kernels.sgd_epoch(
            M, src, dst, perm, lr_start, lr_end, epoch * n_edges, total,
            cfg.negative_samples, kernel_seed(rng), cfg.threads,
        )
        if not np.isfinite(M).all():
            raise TrainingError(
                f"non-finite embedding at level {level}, epoch {epoch}", level, epoch
            )
    return M


def expand(coarse: np.ndarray, m: CoarseningMap) -> np.ndarray:
    """Fine embedding where every vertex copies its super-vertex row."""
    if coarse.shape[0] != m.coarse_count:
        raise ValueError("coarse embedding rows do not match the map")
    return np.ascontiguousarray(coarse[m.map])


def embed_hierarchy(h: Hierarchy, cfg: TrainConfig, rng=None, timings=None) -> np.ndarray:
    """Train coarsest-first, projecting each result down one level.

    ``timings``, if given, receives one ``(level, epochs, seconds)`` tuple per
    level in training order.
    """
    rng = as_generator(rng, cfg.seed)
    D = h.depth
    schedule = distribute_epochs(cfg.epochs, cfg.smoothing, D) if cfg.epochs else \
        EpochSchedule((0,) * D, 0)
    M = init_embedding(h.graphs[-1].vertex_count, cfg.dim, rng)
    for i in range(D - 1, -1, -1):
        t0 = time.perf_counter()
        train_level(h.graphs[i], M, schedule.per_level[i], cfg.learning_rate, cfg, rng, level=i)
        elapsed = time.perf_counter() - t0
        log.debug("level %d: %d epochs in %.2fs", i, schedule.per_level[i], elapsed)
        if timings is not None:
            timings.append((i, schedule.per_level[i], elapsed))
        if i > 0:
            M = expand(M, h.maps[i - 1])
    return M


# --------------------------------------------------------------------------
# files

_HEADER = struct.Struct("<4sIQI")


def save_embedding(M: np.ndarray, path, text: bool = False) -> None:
    if text:
        with open(path, "w") as fh:
            fh.write(f"{M.shape[0]} {M.shape[1]}\n")
            for i, row in enumerate(M):
                fh.write(f"{i} " + " ".join(repr(float(x)) for x in row) + "\n")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMBED_MAGIC, EMBED_VERSION, M.shape[0], M.shape[1]))
        fh.write(np.ascontiguousarray(M, dtype="<f4").tobytes())


def load_embedding(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if head[:4] == EMBED_MAGIC:
            magic, version, rows, dim = _HEADER.unpack(head)
            if version != EMBED_VERSION:
                raise ValueError(f"unsupported embedding version {version}")
            data = np.fromfile(fh, dtype="<f4", count=rows * dim)
            if len(data) != rows * dim:
                raise ValueError("truncated embedding file")
            return data.reshape(rows, dim).astype(np.float32)
    with open(path) as fh:
        rows, dim = (int(x) for x in fh.readline().split())
        M = np.zeros((rows, dim), dtype=np.float32)
        for line in fh:
            parts = line.split()
            if parts:
                M[int(parts[0])] = np.array(parts[1:], dtype=np.float32)
    return M
