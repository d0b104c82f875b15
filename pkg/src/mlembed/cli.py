"""Command-line front end: split, coarsen, embed, evaluate, pipeline.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import kernels
from .coarsen import (
    STRATEGIES, CoarsenConfig, CoarsenError, Hierarchy, build_hierarchy, load_map, save_map,
)
from .datasets import SIZES, load_named, synthetic
from .embed import TrainConfig, TrainingError, embed_hierarchy, load_embedding, save_embedding
from .evaluation import (
    SPLIT_FILES, EvalConfig, EvaluationError, attach_negatives, evaluate, load_split,
    load_train_graph, save_split, split,
)
from .graph import Graph, GraphError, read_graph, write_edge_list
from .rng import substream

log = logging.getLogger("mlembed")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

# graphs with at least this many vertices use a preset's large-scale epochs
LARGE_GRAPH_VERTICES = 10_000_000


@dataclass(frozen=True)
class Preset:
    name: str
    p: float
    lr: float
    e_medium: int
    e_large: int | None


PRESETS = {
    "ultra-fast": Preset("ultra-fast", 0.1, 0.050, 400, None),
    "fast": Preset("fast", 0.1, 0.050, 600, 100),
    "normal": Preset("normal", 0.3, 0.035, 1000, 200),
    "slow": Preset("slow", 0.5, 0.025, 1400, 300),
    "no-coarse": Preset("no-coarse", 0.0, 0.045, 1000, 200),
}


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


def preset_epochs(preset: Preset, vertex_count: int) -> int:
    if vertex_count >= LARGE_GRAPH_VERTICES:
        if preset.e_large is None:
            raise UsageError(f"preset {preset.name} has no epoch count for graphs this large")
        return preset.e_large
    return preset.e_medium


@dataclass
class RunManifest:
    """Everything that determines a run; written next to its outputs."""

    input: str | None = None
    dataset: str | None = None
    seed: int = 0
    ratio: float = 0.8
    preset: str | None = "normal"
    epochs: int | None = None
    learning_rate: float | None = None
    smoothing: float | None = None
    dim: int = 128
    negative_samples: int = 3
    strategy: str = "novel"
    ordering: bool = True
    hub_restriction: bool = True
    max_depth: int = 15
    min_vertices: int = 100
    stop_threshold: float = 0.83
    threads: int = 1
    out_dir: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown manifest keys: {sorted(unknown)}")
        return cls(**data)

    def coarsen_config(self) -> CoarsenConfig:
        depth = 1 if self.preset == "no-coarse" else self.max_depth
        return CoarsenConfig(
            strategy=self.strategy, use_ordering=self.ordering,
            use_hub_restriction=self.hub_restriction, max_depth=depth,
            min_vertices=self.min_vertices, stop_threshold=self.stop_threshold,
            seed=self.seed, threads=self.threads,
        )

    def train_config(self, vertex_count: int) -> TrainConfig:
        preset = PRESETS[self.preset] if self.preset else None
        if preset is None and None in (self.epochs, self.learning_rate, self.smoothing):
            raise UsageError("without a preset, epochs, learning rate and smoothing are required")
        epochs = self.epochs if self.epochs is not None else preset_epochs(preset, vertex_count)
        return TrainConfig(
            dim=self.dim,
            epochs=epochs,
            smoothing=self.smoothing if self.smoothing is not None else preset.p,
            learning_rate=self.learning_rate if self.learning_rate is not None else preset.lr,
            negative_samples=self.negative_samples,
            seed=self.seed,
            threads=self.threads,
        )


def strip_timings(report: dict) -> dict:
    """Copy of a report without wall-clock fields (for reproducibility checks)."""
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()
                    if not (k.endswith("_seconds") or k.endswith("_ms"))}
        if isinstance(x, list):
            return [clean(v) for v in x]
        return x
    return clean(report)


# --------------------------------------------------------------------------
# helpers


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_threads() -> int:
    raw = os.environ.get("MLGE_THREADS")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"MLGE_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("MLGE_THREADS must be at least 1")
    return value


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_input(path) -> Graph:
    """A split directory yields its train graph; anything else is read as a graph file."""
    if os.path.isdir(path):
        return load_train_graph(path)
    g, _ = read_graph(path)
    return g


def _load_graph_source(man: RunManifest) -> tuple[Graph, np.ndarray | None, str]:
    if man.dataset:
        if man.dataset not in SIZES:
            raise UsageError(f"unknown dataset {man.dataset!r}; expected one of {sorted(SIZES)}")
        g, source = load_named(man.dataset, seed=man.seed)
        return g, None, source
    if not man.input:
        raise UsageError("an input graph or a dataset name is required")
    g, id_map = read_graph(man.input)
    return g, id_map, man.input


def _save_hierarchy(h: Hierarchy, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "stats.json"), "w") as fh:
        fh.write(h.stats_json() + "\n")
    for i, m in enumerate(h.maps):
        save_map(m, os.path.join(out_dir, f"level_{i + 1:02d}.map"), i + 1)


def _load_hierarchy(g: Graph, directory, threads: int) -> Hierarchy:
    names = sorted(f for f in os.listdir(directory) if f.endswith(".map"))
    maps = []
    for name in names:
        m, level = load_map(os.path.join(directory, name))
        if level != len(maps) + 1:
            raise CoarsenError(f"{name}: expected level {len(maps) + 1}, found {level}")
        maps.append(m)
    if maps and len(maps[0]) != g.vertex_count:
        raise CoarsenError("hierarchy does not match the input graph")
    return Hierarchy.from_maps(g, maps, threads)


def _train(h: Hierarchy, cfg: TrainConfig):
    if cfg.epochs == 0:
        log.warning("--epochs 0: the embedding is the untrained initialization")
    timings = []
    t0 = time.perf_counter()
    M = embed_hierarchy(h, cfg, substream(cfg.seed, "embed"), timings)
    return M, time.perf_counter() - t0, timings


# --------------------------------------------------------------------------
# commands


def cmd_split(args) -> int:
    if not 0 < args.ratio < 1:
        raise UsageError("--ratio must lie strictly between 0 and 1")
    g, id_map = read_graph(args.input)
    ds = split(g, args.ratio, substream(args.seed, "split"))
    attach_negatives(ds, g, substream(args.seed, "eval"))
    save_split(ds, args.out_dir, id_map)
    man = RunManifest(input=args.input, seed=args.seed, ratio=args.ratio, preset=None,
                      out_dir=args.out_dir)
    _write_json(os.path.join(args.out_dir, "manifest.json"), asdict(man))
    print(f"train: {ds.train_graph.vertex_count} vertices, {ds.train_graph.edge_count} edges; "
          f"test: {len(ds.test_pos)} positive pairs")
    return EXIT_OK


def cmd_coarsen(args) -> int:
    g = _read_input(args.input)
    man = _manifest_from_args(args, preset=None)
    cfg = man.coarsen_config()
    h = build_hierarchy(g, cfg, substream(args.seed, "coarsen"))
    _save_hierarchy(h, args.out_dir)
    _write_json(os.path.join(args.out_dir, "manifest.json"), asdict(man))
    for s in h.per_level_stats:
        print(f"level {s.level}: {s.vertices} vertices, {s.edges} edges")
    return EXIT_OK


def cmd_embed(args) -> int:
    g = _read_input(args.input)
    man = _manifest_from_args(args)
    cfg = man.train_config(g.vertex_count)
    if man.preset == "no-coarse":
        if args.hierarchy:
            log.warning("preset no-coarse ignores --hierarchy and trains on the input only")
        h = Hierarchy([g], [], [])
    elif args.hierarchy:
        h = _load_hierarchy(g, args.hierarchy, man.threads)
    else:
        h = build_hierarchy(g, man.coarsen_config(), substream(man.seed, "coarsen"))
    M, seconds, _ = _train(h, cfg)
    save_embedding(M, args.out, text=args.text)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    man.out_dir = out_dir
    _write_json(os.path.join(out_dir, "embed_manifest.json"), asdict(man))
    print(f"embedded {M.shape[0]} vertices in {seconds:.1f}s over {h.depth} levels")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ds = load_split(args.split_dir)
    M = load_embedding(args.embedding)
    result = evaluate(M, ds, EvalConfig(seed=args.seed))
    report = {"embedding": args.embedding, "split": args.split_dir, **result}
    print(f"auc {result['auc']:.4f}")
    if args.report:
        _write_json(args.report, report)
    return EXIT_OK


def run_pipeline(man: RunManifest) -> dict:
    """split -> coarsen -> embed -> evaluate; outputs go to ``man.out_dir``."""
    out = man.out_dir
    if not out:
        raise UsageError("an output directory is required")
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "manifest.json"), asdict(man))

    stage = "load"
    try:
        g, id_map, source = _load_graph_source(man)
        stage = "split"
        if not 0 < man.ratio < 1:
            raise UsageError("ratio must lie strictly between 0 and 1")
        ds = split(g, man.ratio, substream(man.seed, "split"))
        attach_negatives(ds, g, substream(man.seed, "eval"))
        save_split(ds, os.path.join(out, "split"), id_map)
        stage = "coarsen"
        ccfg = man.coarsen_config()
        t0 = time.perf_counter()
        h = build_hierarchy(ds.train_graph, ccfg, substream(man.seed, "coarsen"))
        coarsen_seconds = time.perf_counter() - t0
        _save_hierarchy(h, os.path.join(out, "hierarchy"))
        stage = "embed"
        tcfg = man.train_config(ds.train_graph.vertex_count)
        M, train_seconds, timings = _train(h, tcfg)
        save_embedding(M, os.path.join(out, "embedding.bin"))
        stage = "evaluate"
        result = evaluate(M, ds, EvalConfig(seed=man.seed))
    except UsageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc

    epochs_by_level = {lvl: e for lvl, e, _ in timings}
    seconds_by_level = {lvl: s for lvl, _, s in timings}
    per_level = [
        {**asdict(s), "epochs": epochs_by_level[s.level], "train_seconds": seconds_by_level[s.level]}
        for s in h.per_level_stats
    ]
    report = {
        "graph": source,
        "strategy": ccfg.strategy,
        "ordering": ccfg.use_ordering,
        "hub_restriction": ccfg.use_hub_restriction,
        "preset": man.preset,
        "epochs": tcfg.epochs,
        "learning_rate": tcfg.learning_rate,
        "smoothing": tcfg.smoothing,
        "dim": tcfg.dim,
        "seed": man.seed,
        "threads": man.threads,
        "backend": kernels.BACKEND,
        "vertices": ds.train_graph.vertex_count,
        "edges": ds.train_graph.edge_count,
        "depth": h.depth,
        "per_level": per_level,
        "coarsen_seconds": coarsen_seconds,
        "train_seconds": train_seconds,
        "auc": result["auc"],
        "eval_seconds": result["fit_seconds"] + result["score_seconds"],
    }
    _write_json(os.path.join(out, "report.json"), report)
    return report


def cmd_pipeline(args) -> int:
    if args.manifest:
        with open(args.manifest) as fh:
            man = RunManifest.from_json(fh.read())
        if args.out_dir:
            man.out_dir = args.out_dir
    else:
        if bool(args.input) == bool(args.dataset):
            raise UsageError("give exactly one of --input and --dataset")
        man = _manifest_from_args(args)
    report = run_pipeline(man)
    print(f"{report['graph']}: D={report['depth']} train {report['train_seconds']:.1f}s "
          f"auc {report['auc']:.4f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    g, source = synthetic(args.dataset, seed=args.seed)
    write_edge_list(g, args.out)
    print(f"{source}: {g.vertex_count} vertices, {g.edge_count} edges -> {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _manifest_from_args(args, preset="__args__") -> RunManifest:
    man = RunManifest(
        input=getattr(args, "input", None),
        dataset=getattr(args, "dataset", None),
        seed=args.seed,
        ratio=getattr(args, "ratio", 0.8),
        preset=getattr(args, "preset", None) if preset == "__args__" else preset,
        epochs=getattr(args, "epochs", None),
        learning_rate=getattr(args, "lr", None),
        smoothing=getattr(args, "smoothing", None),
        dim=getattr(args, "dim", 128),
        negative_samples=getattr(args, "neg", 3),
        strategy=getattr(args, "strategy", "novel"),
        ordering=not getattr(args, "no_ordering", False),
        hub_restriction=not getattr(args, "no_hub_restriction", False),
        max_depth=getattr(args, "max_depth", 15),
        min_vertices=getattr(args, "min_vertices", 100),
        stop_threshold=getattr(args, "stop_threshold", 0.83),
        threads=args.threads,
        out_dir=getattr(args, "out_dir", None),
    )
    if man.epochs is not None and man.epochs < 0:
        raise UsageError("--epochs must be non-negative")
    return man


def _add_coarsen_flags(p):
    p.add_argument("--strategy", choices=STRATEGIES, default="novel")
    p.add_argument("--no-ordering", action="store_true", help="process vertices in id order")
    p.add_argument("--no-hub-restriction", action="store_true",
                   help="allow two high-degree vertices to share a super-vertex")
    p.add_argument("--max-depth", type=int, default=15)
    p.add_argument("--min-vertices", type=int, default=100)
    p.add_argument("--stop-threshold", type=float, default=0.83)


def _add_train_flags(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default="normal",
                   help="explicit --epochs/--lr/--smoothing override its values")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--smoothing", type=float, help="uniform share p of the epoch budget")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--neg", type=int, default=3, help="negative samples per positive update")


def build_parser() -> argparse.ArgumentParser:
    threads = _default_threads()
    parser = _Parser(prog="mlembed", description="Multi-level graph embedding toolkit.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=threads)

    p = sub.add_parser("split", help="train/test split with sampled negatives")
    p.add_argument("--input", required=True)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("coarsen", help="build a coarsening hierarchy")
    p.add_argument("--input", required=True, help="graph file or split directory")
    p.add_argument("--out-dir", required=True)
    _add_coarsen_flags(p)
    common(p)
    p.set_defaults(func=cmd_coarsen)

    p = sub.add_parser("embed", help="train a multi-level embedding")
    p.add_argument("--input", required=True, help="graph file or split directory")
    p.add_argument("--hierarchy", help="directory written by the coarsen command")
    p.add_argument("--out", required=True)
    p.add_argument("--text", action="store_true", help="write a text embedding")
    _add_coarsen_flags(p)
    _add_train_flags(p)
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", help="link-prediction AUCROC of an embedding")
    p.add_argument("--split-dir", required=True)
    p.add_argument("--embedding", required=True)
    p.add_argument("--report")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="split, coarsen, embed and evaluate")
    p.add_argument("--manifest", help="RunManifest JSON; flags below are then ignored")
    p.add_argument("--input")
    p.add_argument("--dataset", choices=sorted(SIZES))
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--out-dir")
    _add_coarsen_flags(p)
    _add_train_flags(p)
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("generate", help="write a synthetic stand-in graph")
    p.add_argument("dataset", choices=sorted(SIZES))
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        logging.basicConfig(
            level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except UsageError as exc:
        print(f"mlembed: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"mlembed: {exc}", file=sys.stderr)
        cause = exc.cause
        if isinstance(cause, (GraphError, EvaluationError, TrainingError, OSError, ValueError)):
            return EXIT_DATA
        return EXIT_INTERNAL
    except (GraphError, EvaluationError, TrainingError, OSError, ValueError) as exc:
        print(f"mlembed: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - safety net
        print(f"mlembed: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
