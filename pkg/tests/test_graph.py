import gzip
import io

import numpy as np
import pytest
from hypothesis import given

from conftest import graphs, graph_from, random_graph
from mlembed.graph import (
    EdgeListError,
    Graph,
    GraphError,
    density,
    load_edge_list,
    load_graph,
    read_graph,
    save_graph,
    shrink_rate,
    write_edge_list,
)


def load_text(text, **kw):
    return load_edge_list(io.BytesIO(text.encode()), **kw)


def test_triangle():
    g, ids = load_text("0 1\n1 2\n2 0\n")
    assert (g.vertex_count, g.edge_count) == (3, 3)
    assert g.degrees().tolist() == [2, 2, 2]
    assert ids.tolist() == [0, 1, 2]


def test_duplicates_and_self_loops_dropped():
    g, _ = load_text("0 1\n1 0\n0 0\n")
    assert (g.vertex_count, g.edge_count) == (2, 1)


def test_toy_loads(toy):
    text = "".join(f"{u} {v}\n" for u, v in zip(*toy.edges()))
    g, _ = load_text(text)
    assert (g.vertex_count, g.edge_count) == (6, 5)


def test_dense_ids_in_first_appearance_order():
    g, ids = load_text("# header\n70 5\n% other comment\n5 1000000000000\n")
    assert ids.tolist() == [70, 5, 1000000000000]
    assert g.has_edge(0, 1) and g.has_edge(1, 2) and not g.has_edge(0, 2)


def test_extra_columns_ignored():
    g, _ = load_text("0 1 0.5\n1 2 7\n")
    assert g.edge_count == 2


@pytest.mark.parametrize(
    "text, line",
    [
        ("0 1\n1 x\n", 2),
        ("0 1\n\n# c\n3\n", 4),
        ("0 1\n2 -4\n", 2),
        (f"0 1\n1 2\n2 {2**40}\n", 3),
    ],
)
def test_bad_lines_report_line_number(text, line):
    with pytest.raises(EdgeListError) as err:
        load_text(text)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_empty_input():
    with pytest.raises(EdgeListError):
        load_text("# only a comment\n")


def test_gzip_path(tmp_path):
    path = tmp_path / "g.txt.gz"
    with gzip.open(path, "wt") as fh:
        fh.write("0 1\n1 2\n")
    g, _ = load_edge_list(str(path))
    assert g.edge_count == 2


def test_shrink_rate_examples():
    assert shrink_rate(Graph.empty(6), Graph.empty(3)) == 0.5
    assert shrink_rate(Graph.empty(9), Graph.empty(9)) == 0.0
    assert shrink_rate(Graph.empty(1021590), Graph.empty(302683)) == pytest.approx(0.7037, abs=5e-5)
    with pytest.raises(GraphError):
        shrink_rate(Graph.empty(0), Graph.empty(0))


def test_density_examples():
    assert 4945382 / 1138499 == pytest.approx(4.34, abs=5e-3)
    star = graph_from(6, [(0, k) for k in range(1, 6)])
    assert density(star) == pytest.approx(5 / 6)
    assert density(graph_from(3, [(0, 1), (1, 2), (0, 2)])) == 1.0
    with pytest.raises(GraphError):
        density(Graph.empty(0))


def test_from_edges_rejects_out_of_range():
    with pytest.raises(GraphError):
        Graph.from_edges(2, [0], [2])


def test_check_catches_asymmetry():
    g = Graph(np.array([0, 1, 1]), np.array([1]))
    with pytest.raises(GraphError):
        g.check()


@given(graphs())
def test_invariants(g):
    g.check()
    assert g.degrees().sum() == 2 * g.edge_count
    for v in range(g.vertex_count):
        for u in g.neighbors_of(v):
            assert g.has_edge(int(u), v)


@given(graphs(min_vertices=2))
def test_edge_list_round_trip(g):
    if g.edge_count == 0:
        return
    buf = io.StringIO()
    write_edge_list(g, buf)
    back, ids = load_text(buf.getvalue())
    # reloading relabels by first appearance; map back before comparing
    u, v = back.edges()
    again = Graph.from_edges(g.vertex_count, ids[u], ids[v])
    non_isolated = np.flatnonzero(g.degrees())
    assert sorted(ids.tolist()) == non_isolated.tolist()
    assert again == g


def test_round_trip_identical_when_labels_dense(tmp_path):
    g = random_graph(50, 200, 1)
    g = Graph.from_edges(g.vertex_count, *g.edges())
    path = tmp_path / "g.txt"
    write_edge_list(g, str(path))
    back, ids = load_edge_list(str(path))
    u, v = back.edges()
    assert Graph.from_edges(back.vertex_count, ids[u], ids[v]).edge_count == g.edge_count


def test_binary_cache(tmp_path):
    g = random_graph(300, 1000, 2)
    path = tmp_path / "g.mlge"
    save_graph(g, path)
    assert open(path, "rb").read(4) == b"MLGE"
    assert load_graph(path) == g
    h, ids = read_graph(path)
    assert h == g and ids.tolist() == list(range(300))


def test_binary_cache_truncated(tmp_path):
    g = random_graph(30, 60, 3)
    path = tmp_path / "g.mlge"
    save_graph(g, path)
    data = open(path, "rb").read()
    open(path, "wb").write(data[:-4])
    with pytest.raises(GraphError):
        load_graph(path)
