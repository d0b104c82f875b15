import hashlib
import json
import os

import numpy as np
import pytest

from conftest import TOY_EDGES, random_graph
from mlembed.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    LARGE_GRAPH_VERTICES,
    PRESETS,
    RunManifest,
    UsageError,
    main,
    preset_epochs,
    strip_timings,
)
from mlembed.embed import load_embedding
from mlembed.graph import write_edge_list


def digest(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.txt"
    path.write_text("".join(f"{u} {v}\n" for u, v in TOY_EDGES))
    return str(path)


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.txt"
    write_edge_list(random_graph(600, 2400, 0), str(path))
    return str(path)


def test_presets_locked():
    table = {
        "ultra-fast": (0.1, 0.050, 400, None),
        "fast": (0.1, 0.050, 600, 100),
        "normal": (0.3, 0.035, 1000, 200),
        "slow": (0.5, 0.025, 1400, 300),
        "no-coarse": (0.0, 0.045, 1000, 200),
    }
    assert {k: (p.p, p.lr, p.e_medium, p.e_large) for k, p in PRESETS.items()} == table


def test_preset_epochs_by_scale():
    assert preset_epochs(PRESETS["normal"], 317_080) == 1000
    assert preset_epochs(PRESETS["normal"], LARGE_GRAPH_VERTICES) == 200
    with pytest.raises(UsageError):
        preset_epochs(PRESETS["ultra-fast"], LARGE_GRAPH_VERTICES)


def test_split_toy(toy_file, tmp_path):
    out = tmp_path / "split"
    assert main(["split", "--input", toy_file, "--ratio", "0.8", "--out-dir", str(out)]) == EXIT_OK
    assert len((out / "train.edges").read_text().splitlines()) == 4
    assert (out / "manifest.json").exists()


def test_split_bad_ratio(toy_file, tmp_path):
    assert main(["split", "--input", toy_file, "--ratio", "1.5", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_split_deterministic(small_file, tmp_path):
    for name in ("a", "b"):
        main(["split", "--input", small_file, "--seed", "4", "--out-dir", str(tmp_path / name)])
    for f in os.listdir(tmp_path / "a"):
        if f == "manifest.json":  # records its own out-dir
            continue
        assert digest(tmp_path / "a" / f) == digest(tmp_path / "b" / f), f


def test_missing_input(tmp_path):
    assert main(["split", "--input", str(tmp_path / "nope"), "--out-dir", str(tmp_path)]) == EXIT_DATA


def test_malformed_input(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 two\n")
    assert main(["split", "--input", str(bad), "--out-dir", str(tmp_path / "s")]) == EXIT_DATA


def test_unknown_strategy(small_file, tmp_path):
    assert main(["coarsen", "--input", small_file, "--strategy", "metis",
                 "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_coarsen_depth_one(small_file, tmp_path):
    assert main(["coarsen", "--input", small_file, "--max-depth", "1",
                 "--out-dir", str(tmp_path / "h")]) == EXIT_OK
    stats = json.loads((tmp_path / "h" / "stats.json").read_text())
    assert [s["level"] for s in stats] == [0]


def test_stagewise_run(small_file, tmp_path):
    sp, hier, emb = tmp_path / "sp", tmp_path / "h", tmp_path / "m.bin"
    assert main(["split", "--input", small_file, "--out-dir", str(sp)]) == EXIT_OK
    assert main(["coarsen", "--input", str(sp), "--out-dir", str(hier)]) == EXIT_OK
    stats = json.loads((hier / "stats.json").read_text())
    assert len(stats) > 1
    assert main(["embed", "--input", str(sp), "--hierarchy", str(hier), "--preset", "fast",
                 "--epochs", "20", "--dim", "16", "--out", str(emb)]) == EXIT_OK
    reports = []
    for k in range(2):
        rep = tmp_path / f"r{k}.json"
        assert main(["evaluate", "--split-dir", str(sp), "--embedding", str(emb),
                     "--report", str(rep)]) == EXIT_OK
        reports.append(json.loads(rep.read_text()))
    assert 0.0 <= reports[0]["auc"] <= 1.0
    assert reports[0]["auc"] == reports[1]["auc"]


def test_evaluate_missing_embedding(small_file, tmp_path):
    main(["split", "--input", small_file, "--out-dir", str(tmp_path / "sp")])
    assert main(["evaluate", "--split-dir", str(tmp_path / "sp"),
                 "--embedding", str(tmp_path / "none.bin")]) == EXIT_DATA


def test_evaluate_row_mismatch(small_file, tmp_path):
    from mlembed.embed import save_embedding

    main(["split", "--input", small_file, "--out-dir", str(tmp_path / "sp")])
    save_embedding(np.zeros((3, 4), np.float32), tmp_path / "m.bin")
    assert main(["evaluate", "--split-dir", str(tmp_path / "sp"),
                 "--embedding", str(tmp_path / "m.bin")]) == EXIT_DATA


def test_zero_epochs_is_initialization(small_file, tmp_path, caplog):
    main(["split", "--input", small_file, "--out-dir", str(tmp_path / "sp")])
    out = tmp_path / "m.bin"
    for k in range(2):
        assert main(["embed", "--input", str(tmp_path / "sp"), "--preset", "no-coarse",
                     "--epochs", "0", "--dim", "8", "--out", str(out)]) == EXIT_OK
    M = load_embedding(out)
    assert np.abs(M).max() <= 0.5 / 8
    assert "epochs 0" in caplog.text


def test_pipeline_reproducible(small_file, tmp_path):
    reports = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["pipeline", "--input", small_file, "--preset", "ultra-fast", "--dim", "16",
                     "--seed", "7", "--out-dir", str(out)]) == EXIT_OK
        reports.append(json.loads((out / "report.json").read_text()))
    assert strip_timings(reports[0]) == strip_timings(reports[1])
    assert digest(tmp_path / "a" / "embedding.bin") == digest(tmp_path / "b" / "embedding.bin")
    rep = reports[0]
    for key in ("graph", "strategy", "preset", "depth", "per_level", "train_seconds",
                "coarsen_seconds", "auc"):
        assert key in rep
    assert rep["depth"] == len(rep["per_level"])

    # the written manifest alone reproduces the run
    manifest = tmp_path / "a" / "manifest.json"
    assert main(["pipeline", "--manifest", str(manifest), "--out-dir", str(tmp_path / "c")]) == EXIT_OK
    assert digest(tmp_path / "c" / "embedding.bin") == digest(tmp_path / "a" / "embedding.bin")


def test_pipeline_no_coarse_single_level(small_file, tmp_path):
    assert main(["pipeline", "--input", small_file, "--preset", "no-coarse", "--epochs", "5",
                 "--dim", "8", "--out-dir", str(tmp_path / "o")]) == EXIT_OK
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["depth"] == 1 and rep["per_level"][0]["epochs"] == 5


def test_pipeline_names_failed_stage(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\nx y\n")
    assert main(["pipeline", "--input", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_DATA
    assert "load" in capsys.readouterr().err


def test_pipeline_needs_one_source(tmp_path):
    assert main(["pipeline", "--out-dir", str(tmp_path)]) == EXIT_USAGE


def test_manifest_round_trip():
    man = RunManifest(input="g.txt", seed=5, strategy="anti", ordering=False, threads=2)
    assert RunManifest.from_json(man.to_json()) == man
    with pytest.raises(UsageError):
        RunManifest.from_json('{"colour": 1}')


def test_strip_timings():
    rep = {"auc": 0.9, "train_seconds": 1.0, "per_level": [{"vertices": 3, "coarsen_ms": 2.0}]}
    assert strip_timings(rep) == {"auc": 0.9, "per_level": [{"vertices": 3}]}


def test_threads_env_default(monkeypatch, small_file, tmp_path):
    monkeypatch.setenv("MLGE_THREADS", "2")
    assert main(["pipeline", "--input", small_file, "--preset", "ultra-fast", "--dim", "8",
                 "--out-dir", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["threads"] == 2
