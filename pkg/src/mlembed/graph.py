"""Undirected simple graphs in compressed adjacency (CSR) form."""

from __future__ import annotations

import gzip
import io
import os
import struct
import warnings
from dataclasses import dataclass

import numpy as np

GRAPH_MAGIC = b"MLGE"
GRAPH_VERSION = 1
FLAG_WIDE_IDS = 1

MAX_VERTICES = 2**31 - 1
MAX_INPUT_ID = 2**40


class GraphError(ValueError):
    """Invalid graph data or a violated graph precondition."""


class EdgeListError(GraphError):
    """Malformed edge-list input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph.

    ``neighbors[offsets[v]:offsets[v+1]]`` is the sorted neighbor slice of
    ``v``; every undirected edge is stored in both directions, so
    ``edge_count == len(neighbors) // 2``.
    """

    offsets: np.ndarray
    neighbors: np.ndarray

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.offsets, dtype=np.int64)
        neighbors = np.ascontiguousarray(self.neighbors, dtype=np.int32)
        offsets.flags.writeable = False
        neighbors.flags.writeable = False
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "neighbors", neighbors)

    @property
    def vertex_count(self) -> int:
        return len(self.offsets) - 1

    @property
    def edge_count(self) -> int:
        return len(self.neighbors) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v] : self.offsets[v + 1]]

    def sources(self) -> np.ndarray:
        """Row index of every adjacency entry."""
        return np.repeat(np.arange(self.vertex_count, dtype=np.int32), self.degrees())

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once, as (u, v) arrays with u < v."""
        src = self.sources()
        keep = src < self.neighbors
        return src[keep], self.neighbors[keep]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors_of(u)
        i = np.searchsorted(row, v)
        return bool(i < len(row) and row[i] == v)

    def edge_keys(self) -> np.ndarray:
        """Sorted int64 keys ``u * n + v`` (u < v) for vectorized membership tests."""
        u, v = self.edges()
        return u.astype(np.int64) * self.vertex_count + v

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets) and np.array_equal(
            self.neighbors, other.neighbors
        )

    def __repr__(self):
        return f"Graph(vertices={self.vertex_count}, edges={self.edge_count})"

    @classmethod
    def from_edges(cls, vertex_count: int, u, v) -> "Graph":
        """Build from endpoint arrays; symmetrizes, drops self-loops and duplicates."""
        if vertex_count > MAX_VERTICES:
            raise GraphError(f"{vertex_count} vertices exceeds the supported maximum")
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if len(u) != len(v):
            raise GraphError("endpoint arrays differ in length")
        if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= vertex_count):
            raise GraphError("edge endpoint out of range")
        keep = u != v
        lo = np.minimum(u[keep], v[keep])
        hi = np.maximum(u[keep], v[keep])
        keys = np.unique(lo * vertex_count + hi)
        lo, hi = np.divmod(keys, vertex_count)
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.argsort(src * vertex_count + dst, kind="stable")
        offsets = np.zeros(vertex_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=vertex_count), out=offsets[1:])
        return cls(offsets, dst[order])

    @classmethod
    def empty(cls, vertex_count: int) -> "Graph":
        return cls(np.zeros(vertex_count + 1, dtype=np.int64), np.zeros(0, dtype=np.int32))

    def check(self) -> None:
        """Raise GraphError if any structural invariant is broken."""
        off, nb = self.offsets, self.neighbors
        n = self.vertex_count
        if n < 0 or off[0] != 0 or off[-1] != len(nb):
            raise GraphError("offsets do not frame the neighbor array")
        if np.any(np.diff(off) < 0):
            raise GraphError("offsets decrease")
        if len(nb) % 2:
            raise GraphError("odd number of adjacency entries")
        if len(nb) == 0:
            return
        if nb.min() < 0 or nb.max() >= n:
            raise GraphError("neighbor id out of range")
        src = self.sources()
        if np.any(src == nb):
            raise GraphError("self-loop present")
        same_row = src[1:] == src[:-1]
        if np.any(nb[1:][same_row] <= nb[:-1][same_row]):
            raise GraphError("neighbor slice not strictly increasing")
        fwd = src.astype(np.int64) * n + nb
        rev = np.sort(nb.astype(np.int64) * n + src)
        if not np.array_equal(fwd, rev):
            raise GraphError("adjacency is not symmetric")


def density(g: Graph) -> float:
    """Undirected edges per vertex, ``|E| / |V|``."""
    if g.vertex_count == 0:
        raise GraphError("density of an empty graph is undefined")
    return g.edge_count / g.vertex_count


def shrink_rate(prev: Graph, next: Graph) -> float:
    """Fraction of vertices removed going from ``prev`` to ``next``."""
    if prev.vertex_count == 0:
        raise GraphError("shrink rate needs a non-empty previous level")
    return (prev.vertex_count - next.vertex_count) / prev.vertex_count


# --------------------------------------------------------------------------
# text edge lists


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if path.endswith(".gz"):
            return gzip.open(path, "rb"), True
        return open(path, "rb"), True
    return source, False


def _locate_bad_line(data: bytes, comment_prefixes) -> EdgeListError:
    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line or line[:1].decode("latin-1") in comment_prefixes:
            continue
        parts = line.split()
        if len(parts) < 2:
            return EdgeListError("expected two vertex ids", lineno)
        for tok in parts[:2]:
            try:
                val = int(tok)
            except ValueError:
                return EdgeListError(f"not an integer: {tok.decode('latin-1')!r}", lineno)
            if not 0 <= val < MAX_INPUT_ID:
                return EdgeListError(f"vertex id {val} outside [0, 2^40)", lineno)
    return EdgeListError("unparseable edge list")


def load_edge_list(source, comment_prefixes=("#", "%")) -> tuple[Graph, np.ndarray]:
    """Parse a whitespace-separated edge list.

    ``source`` is a path (``.gz`` is decompressed) or a binary stream.
    Returns the normalized graph and ``id_map`` where ``id_map[dense]`` is
    the original id; dense ids follow first appearance in the file.
    """
    stream, owned = _open_text(source)
    try:
        data = stream.read()
    finally:
        if owned:
            stream.close()
    if isinstance(data, str):
        data = data.encode()
    prefixes = tuple(comment_prefixes)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty input is reported below
            pairs = np.loadtxt(
                io.BytesIO(data),
                dtype=np.int64,
                comments=list(prefixes) or None,
                usecols=(0, 1),
                ndmin=2,
                encoding="latin-1",
            )
    except ValueError:
        raise _locate_bad_line(data, prefixes) from None
    if pairs.size == 0:
        raise EdgeListError("edge list is empty")
    if pairs.min() < 0 or pairs.max() >= MAX_INPUT_ID:
        raise _locate_bad_line(data, prefixes)

    flat = pairs.ravel()
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    by_appearance = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[by_appearance] = np.arange(len(uniq))
    dense = rank[inverse.ravel()].reshape(-1, 2)
    id_map = uniq[by_appearance]
    return Graph.from_edges(len(uniq), dense[:, 0], dense[:, 1]), id_map


def write_edge_list(g: Graph, target, id_map=None) -> None:
    """Write each undirected edge once as ``u v`` lines (optionally relabelled)."""
    u, v = g.edges()
    if id_map is not None:
        id_map = np.asarray(id_map)
        u, v = id_map[u], id_map[v]
    text = "".join(f"{a} {b}\n" for a, b in zip(u.tolist(), v.tolist()))
    if isinstance(target, (str, os.PathLike)):
        opener = gzip.open if os.fspath(target).endswith(".gz") else open
        with opener(target, "wt") as fh:
            fh.write(text)
    elif isinstance(target, io.TextIOBase):
        target.write(text)
    else:
        target.write(text.encode())


# --------------------------------------------------------------------------
# binary cache

_HEADER = struct.Struct("<4sIIQQ")


def save_graph(g: Graph, path) -> None:
    wide = g.vertex_count > 0xFFFFFFFF
    nb_dtype = "<u8" if wide else "<u4"
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                GRAPH_MAGIC, GRAPH_VERSION, FLAG_WIDE_IDS if wide else 0,
                g.vertex_count, g.edge_count,
            )
        )
        fh.write(g.offsets.astype("<u8").tobytes())
        fh.write(g.neighbors.astype(nb_dtype).tobytes())


def load_graph(path) -> Graph:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise GraphError("truncated graph cache header")
        magic, version, flags, n, m = _HEADER.unpack(head)
        if magic != GRAPH_MAGIC:
            raise GraphError("not a graph cache file")
        if version != GRAPH_VERSION:
            raise GraphError(f"unsupported graph cache version {version}")
        nb_dtype = "<u8" if flags & FLAG_WIDE_IDS else "<u4"
        offsets = np.fromfile(fh, dtype="<u8", count=n + 1)
        neighbors = np.fromfile(fh, dtype=nb_dtype, count=2 * m)
    if len(offsets) != n + 1 or len(neighbors) != 2 * m:
        raise GraphError("truncated graph cache body")
    return Graph(offsets.astype(np.int64), neighbors.astype(np.int32))


def read_graph(path, comment_prefixes=("#", "%")) -> tuple[Graph, np.ndarray]:
    """Load either a binary cache (by magic) or a text edge list."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == GRAPH_MAGIC:
        g = load_graph(path)
        return g, np.arange(g.vertex_count, dtype=np.int64)
    return load_edge_list(path, comment_prefixes)
