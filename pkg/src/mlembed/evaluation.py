"""Link-prediction evaluation: split, negatives, Hadamard features, AUCROC."""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .graph import Graph, GraphError
from .rng import as_generator


class EvaluationError(ValueError):
    pass


@dataclass(eq=False)
class EvalDataset:
    """A train/test split.

    ``train_ids[c]`` is the id (in the full graph) of compacted train vertex
    ``c``; all pair arrays use compacted ids.
    """

    train_graph: Graph
    train_ids: np.ndarray
    test_pos: np.ndarray
    train_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    train_labels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))
    test_pairs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))
    test_labels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))


@dataclass
class EvalConfig:
    epochs: int = 5
    lr: float = 0.01
    l2: float = 1e-4
    seed: int = 0
    # training negatives follow the literal (V x V) minus E_train rule unless set
    train_negatives_exclude_full: bool = False
    test_negatives_exclude_full: bool = True


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X.astype(np.float64) @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.decision(X)))


def split(g: Graph, train_fraction: float = 0.8, rng=None) -> EvalDataset:
    """Edge-uniform split; isolated train vertices and their test edges dropped."""
    if not 0 < train_fraction < 1:
        raise EvaluationError("train_fraction must lie strictly between 0 and 1")
    rng = as_generator(rng)
    u, v = g.edges()
    n_edges = len(u)
    n_train = math.ceil(train_fraction * n_edges)
    perm = rng.permutation(n_edges)
    tr, te = perm[:n_train], perm[n_train:]
    tu, tv = u[tr], v[tr]
    present = np.zeros(g.vertex_count, dtype=bool)
    present[tu] = True
    present[tv] = True
    train_ids = np.flatnonzero(present)
    if len(train_ids) == 0:
        raise EvaluationError("train graph is empty")
    compact = np.full(g.vertex_count, -1, dtype=np.int64)
    compact[train_ids] = np.arange(len(train_ids))
    train_graph = Graph.from_edges(len(train_ids), compact[tu], compact[tv])
    eu, ev = u[te], v[te]
    keep = present[eu] & present[ev]
    test_pos = np.stack([compact[eu[keep]], compact[ev[keep]]], axis=1)
    return EvalDataset(train_graph, train_ids, test_pos)


def sample_negatives(full: Graph, count: int, vertex_pool, rng=None) -> np.ndarray:
    """``count`` distinct unordered non-edges of ``full`` with both ends in the pool."""
    if count < 0:
        raise EvaluationError("count must be non-negative")
    pool = np.asarray(vertex_pool, dtype=np.int64)
    if count == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if len(pool) < 2:
        raise EvaluationError("vertex pool needs at least two vertices")
    rng = as_generator(rng)
    n = full.vertex_count
    edge_keys = full.edge_keys()
    budget = 100 * count
    drawn = 0
    found = np.zeros(0, dtype=np.int64)
    while len(found) < count:
        if drawn >= budget:
            raise EvaluationError(
                f"could not find {count} non-edges within {budget} draws; graph too dense"
            )
        batch = min(budget - drawn, max(2 * (count - len(found)), 1024))
        a = pool[rng.integers(0, len(pool), batch)]
        b = pool[rng.integers(0, len(pool), batch)]
        drawn += batch
        ok = a != b
        lo = np.minimum(a, b)[ok]
        hi = np.maximum(a, b)[ok]
        keys = lo * n + hi
        if len(edge_keys):
            pos = np.searchsorted(edge_keys, keys).clip(max=len(edge_keys) - 1)
            keys = keys[edge_keys[pos] != keys]
        # keep first occurrences, in draw order, that are new
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]
        keys = keys[~np.isin(keys, found)]
        found = np.concatenate([found, keys[: count - len(found)]])
    lo, hi = np.divmod(found, n)
    return np.stack([lo, hi], axis=1)


def attach_negatives(ds: EvalDataset, full: Graph, rng=None, cfg: EvalConfig | None = None) -> EvalDataset:
    """Fill balanced train/test pair sets (labels 1 then 0)."""
    cfg = cfg or EvalConfig()
    rng = as_generator(rng)
    tg = ds.train_graph
    pool_full = ds.train_ids

    def negatives(count, exclude_full):
        if exclude_full:
            pairs = sample_negatives(full, count, pool_full, rng)
            lookup = np.full(full.vertex_count, -1, dtype=np.int64)
            lookup[ds.train_ids] = np.arange(len(ds.train_ids))
            return lookup[pairs]
        return sample_negatives(tg, count, np.arange(tg.vertex_count), rng)

    tu, tv = tg.edges()
    pos = np.stack([tu, tv], axis=1).astype(np.int64)
    neg = negatives(len(pos), cfg.train_negatives_exclude_full)
    ds.train_pairs = np.concatenate([pos, neg])
    ds.train_labels = np.concatenate([np.ones(len(pos), np.int8), np.zeros(len(neg), np.int8)])
    tneg = negatives(len(ds.test_pos), cfg.test_negatives_exclude_full)
    ds.test_pairs = np.concatenate([ds.test_pos.astype(np.int64), tneg])
    ds.test_labels = np.concatenate(
        [np.ones(len(ds.test_pos), np.int8), np.zeros(len(tneg), np.int8)]
    )
    return ds


def hadamard_features(M: np.ndarray, pairs) -> np.ndarray:
    """Row-wise products ``M[u] * M[v]``; a single pair gives a single vector."""
    pairs = np.asarray(pairs, dtype=np.int64)
    single = pairs.ndim == 1
    pairs = pairs.reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= M.shape[0]):
        raise EvaluationError("pair refers to a vertex outside the embedding")
    out = M[pairs[:, 0]] * M[pairs[:, 1]]
    return out[0] if single else out


def train_logreg(features, labels, epochs=5, lr=0.01, l2=1e-4, rng=None) -> LinearModel:
    """Logistic regression by per-sample SGD (log loss, L2, shuffled epochs)."""
    X = np.ascontiguousarray(features, dtype=np.float32)
    y = np.ascontiguousarray(labels, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) < 2:
        raise EvaluationError("need a feature row per label and at least two rows")
    if len(np.unique(y)) < 2:
        raise EvaluationError("both classes must be present")
    rng = as_generator(rng)
    w = np.zeros(X.shape[1])
    b = np.zeros(1)
    for _ in range(epochs):
        kernels.logreg_epoch(X, y, rng.permutation(len(y)), w, b, lr, l2)
    if not (np.isfinite(w).all() and np.isfinite(b).all()):
        raise EvaluationError("logistic regression diverged")
    return LinearModel(w, float(b[0]))


def auc_roc(scores, labels) -> float:
    """Probability a positive outranks a negative (ties count half)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("AUC needs both classes")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def train_logreg_pairs(M, pairs, labels, epochs=5, lr=0.01, l2=1e-4, rng=None) -> LinearModel:
    """``train_logreg`` on Hadamard features of ``pairs`` without materializing them."""
    M = np.ascontiguousarray(M, dtype=np.float32)
    pairs = np.ascontiguousarray(pairs, dtype=np.int64).reshape(-1, 2)
    y = np.ascontiguousarray(labels, dtype=np.float64)
    if len(pairs) != len(y) or len(y) < 2:
        raise EvaluationError("need a pair per label and at least two pairs")
    if len(np.unique(y)) < 2:
        raise EvaluationError("both classes must be present")
    if pairs.min() < 0 or pairs.max() >= M.shape[0]:
        raise EvaluationError("pair refers to a vertex outside the embedding")
    rng = as_generator(rng)
    w = np.zeros(M.shape[1])
    b = np.zeros(1)
    for _ in range(epochs):
        kernels.logreg_pairs_epoch(M, pairs, y, rng.permutation(len(y)), w, b, lr, l2)
    if not (np.isfinite(w).all() and np.isfinite(b).all()):
        raise EvaluationError("logistic regression diverged")
    return LinearModel(w, float(b[0]))


def score_pairs(model: LinearModel, M, pairs, chunk=1 << 18) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.empty(len(pairs))
    for lo in range(0, len(pairs), chunk):
        out[lo : lo + chunk] = model.decision(hadamard_features(M, pairs[lo : lo + chunk]))
    return out


def evaluate(M: np.ndarray, ds: EvalDataset, cfg: EvalConfig | None = None) -> dict:
    """Fit the classifier on the train pairs and report test AUCROC."""
    cfg = cfg or EvalConfig()
    if M.shape[0] != ds.train_graph.vertex_count:
        raise EvaluationError(
            f"embedding has {M.shape[0]} rows, train graph has {ds.train_graph.vertex_count} vertices"
        )
    rng = as_generator(cfg.seed)
    t0 = time.perf_counter()
    model = train_logreg_pairs(M, ds.train_pairs, ds.train_labels, cfg.epochs, cfg.lr, cfg.l2, rng)
    t1 = time.perf_counter()
    auc = auc_roc(score_pairs(model, M, ds.test_pairs), ds.test_labels)
    t2 = time.perf_counter()
    return {"auc": auc, "fit_seconds": t1 - t0, "score_seconds": t2 - t1}


# --------------------------------------------------------------------------
# split persistence

SPLIT_FILES = {
    "train": "train.edges",
    "test_pos": "test_pos.pairs",
    "train_neg": "train_neg.pairs",
    "test_neg": "test_neg.pairs",
    "ids": "train_ids.txt",
}


def _write_pairs(path, pairs):
    np.savetxt(path, np.asarray(pairs, dtype=np.int64).reshape(-1, 2), fmt="%d")


def _read_pairs(path):
    return np.loadtxt(path, dtype=np.int64, ndmin=2).reshape(-1, 2)


def save_split(ds: EvalDataset, out_dir, original_ids=None) -> None:
    """Write the split as text; ``original_ids`` relabels train ids to input labels."""
    os.makedirs(out_dir, exist_ok=True)
    u, v = ds.train_graph.edges()
    _write_pairs(os.path.join(out_dir, SPLIT_FILES["train"]), np.stack([u, v], axis=1))
    _write_pairs(os.path.join(out_dir, SPLIT_FILES["test_pos"]), ds.test_pos)
    n_tr = int(ds.train_labels.sum())
    n_te = int(ds.test_labels.sum())
    _write_pairs(os.path.join(out_dir, SPLIT_FILES["train_neg"]), ds.train_pairs[n_tr:])
    _write_pairs(os.path.join(out_dir, SPLIT_FILES["test_neg"]), ds.test_pairs[n_te:])
    ids = ds.train_ids if original_ids is None else np.asarray(original_ids)[ds.train_ids]
    np.savetxt(os.path.join(out_dir, SPLIT_FILES["ids"]), ids, fmt="%d")


def _load_train(out_dir):
    ids = np.loadtxt(os.path.join(out_dir, SPLIT_FILES["ids"]), dtype=np.int64, ndmin=1)
    train = _read_pairs(os.path.join(out_dir, SPLIT_FILES["train"]))
    if len(train) and (train.min() < 0 or train.max() >= len(ids)):
        raise GraphError("train edge refers to a vertex outside the id list")
    g = Graph.from_edges(len(ids), train[:, 0], train[:, 1])
    if g.edge_count != len(train):
        raise GraphError("train edge file is not a simple edge list")
    return g, ids


def load_train_graph(out_dir) -> Graph:
    """The train graph of a saved split, in its compacted ids."""
    return _load_train(out_dir)[0]


def load_split(out_dir) -> EvalDataset:
    g, ids = _load_train(out_dir)
    test_pos = _read_pairs(os.path.join(out_dir, SPLIT_FILES["test_pos"]))
    train_neg = _read_pairs(os.path.join(out_dir, SPLIT_FILES["train_neg"]))
    test_neg = _read_pairs(os.path.join(out_dir, SPLIT_FILES["test_neg"]))
    tu, tv = g.edges()
    pos = np.stack([tu, tv], axis=1).astype(np.int64)
    return EvalDataset(
        g,
        ids,
        test_pos,
        np.concatenate([pos, train_neg]),
        np.concatenate([np.ones(len(pos), np.int8), np.zeros(len(train_neg), np.int8)]),
        np.concatenate([test_pos, test_neg]),
        np.concatenate([np.ones(len(test_pos), np.int8), np.zeros(len(test_neg), np.int8)]),
    )
