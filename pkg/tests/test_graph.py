import pytest

from jacfact.graph import (
    DiffGraph,
    Edge,
    GraphError,
    GraphParseError,
    PathGuardExceeded,
    classify_vertices,
    count_paths,
    depth_levels,
    enumerate_paths,
    format_graph,
    inout_paths,
    overlap_degree,
    parse_graph,
    rt_degrees,
)
from jacfact.structure import segment_cross_level

from conftest import load_graph, random_layered_dag


def test_parse_fig1a_partition():
    g = load_graph("fig1a")
    y, z, x = classify_vertices(g)
    assert y == ("v4", "v5", "v6")
    assert x == ("v1", "v2")
    assert z == ("v3",)


def test_parse_single_edge():
    g = parse_graph("e e1 a b\n")
    assert g.roots == ("a",) and g.terminals == ("b",)
    assert g.edge("e1").label == "e1"


def test_parse_errors():
    with pytest.raises(GraphParseError, match="cycle"):
        parse_graph("e e1 a b\ne e2 b a\n")
    with pytest.raises(GraphParseError, match="duplicate edge id"):
        parse_graph("e e1 a b\ne e1 b c\n")
    with pytest.raises(GraphParseError):
        parse_graph("")
    with pytest.raises(GraphParseError, match="line 1"):
        parse_graph("edge oops\n")


def test_format_round_trip():
    text = "e e1 v1 v2\ne e2 v1 v4 w\n"
    g = parse_graph(text)
    assert format_graph(g) == text
    assert format_graph(parse_graph(format_graph(g))) == format_graph(g)


def test_classify_fig4a_fig9a(fig4a, fig9a):
    y, z, x = classify_vertices(fig4a)
    assert y == ("v1",) and x == ("v7",)
    assert set(z) == {"v2", "v3", "v4", "v5", "v6"}
    y, _, x = classify_vertices(fig9a)
    assert set(y) == {"v0", "v-1", "v-2", "v-3"}
    assert set(x) == {"v10", "v11", "v12", "v13"}


def test_enumerate_paths_counts(fig4a, fig4b):
    assert len(enumerate_paths(fig4a, "v1", "v7")) == 4
    assert len(enumerate_paths(fig4b, "v1", "v9")) == 6
    assert enumerate_paths(fig4a, "v1", "v1") == []
    assert enumerate_paths(fig4a, "v7", "v1") == []


def test_enumerate_paths_deterministic(fig4b):
    paths = enumerate_paths(fig4b, "v1", "v9")
    assert paths == sorted(paths)
    with pytest.raises(GraphError, match="unknown vertex"):
        enumerate_paths(fig4b, "nope", "v9")


def test_path_guard():
    edges = []
    # ladder of diamonds: 2**12 paths
    for i in range(12):
        edges.append(Edge(f"a{i}", f"n{i}", f"m{i}a", f"a{i}"))
        edges.append(Edge(f"b{i}", f"n{i}", f"m{i}b", f"b{i}"))
        edges.append(Edge(f"c{i}", f"m{i}a", f"n{i+1}", f"c{i}"))
        edges.append(Edge(f"d{i}", f"m{i}b", f"n{i+1}", f"d{i}"))
    g = DiffGraph(edges)
    with pytest.raises(PathGuardExceeded):
        enumerate_paths(g, "n0", "n12", guard=1000)


def test_depth_levels_fig5a():
    g = load_graph("fig5a")
    levels, cross = depth_levels(g)
    assert levels == {"v1": 0, "v2": 1, "v3": 1, "v4": 2}
    assert cross == {"e5"}


def test_depth_levels_chain():
    g = parse_graph("e e1 a b\ne e2 b c\n")
    levels, cross = depth_levels(g)
    assert levels == {"a": 0, "b": 1, "c": 2}
    assert cross == set()


def test_depth_levels_fig9a(fig9a):
    levels, cross = depth_levels(fig9a)
    assert max(levels.values()) == 6
    assert all(levels[t] == 6 for t in fig9a.terminals)
    # terminal-incoming edges that skip levels
    assert {"e15", "e16"} <= cross


def test_levels_are_least_fixpoint(fig9a):
    levels, _ = depth_levels(fig9a)
    terminals = set(fig9a.terminals)
    for v in fig9a.vertices:
        preds = fig9a.in_edges(v)
        expected = 0 if not preds else 1 + max(levels[e.src] for e in preds)
        if v in terminals:
            assert levels[v] >= expected
        else:
            assert levels[v] == expected
    for e in fig9a.edges:
        assert levels[e.dst] > levels[e.src]


def test_rt_degrees_fig9a(fig9a):
    rt = rt_degrees(fig9a)
    assert rt["v1"] == (2, 4)
    assert rt["v2"] == (3, 4)
    assert rt["v5"] == (4, 4)
    assert rt["v9"] == (4, 2)
    for r in fig9a.roots:
        assert rt[r][0] == 0
    for t in fig9a.terminals:
        assert rt[t][1] == 0


def test_overlap_degree(fig4a, fig4b):
    # paths through one vertex: incoming edges overlap out-degree times
    paths = [tuple(p) for p in inout_paths(fig4b, "v7")]
    assert overlap_degree(fig4b, paths, "e11") == 2
    paths_yx = enumerate_paths(fig4a, "v1", "v7")
    assert overlap_degree(fig4a, paths_yx, "e3") == 2
    assert overlap_degree(fig4a, paths_yx, "e1") == 2
    assert overlap_degree(fig4a, [], "e1") == 0
    with pytest.raises(GraphError):
        overlap_degree(fig4a, paths_yx, "zzz")


def test_overlap_formula_on_vertex_paths(fig4b):
    for v in ("v2", "v3", "v5", "v7", "v8"):
        paths = inout_paths(fig4b, v)
        for e in fig4b.in_edges(v):
            assert overlap_degree(fig4b, paths, e.id) == len(fig4b.out_edges(v))
        for e in fig4b.out_edges(v):
            assert overlap_degree(fig4b, paths, e.id) == len(fig4b.in_edges(v))


def test_path_count_matches_levelwise_matrix_product():
    import random

    rng = random.Random(7)
    for _ in range(25):
        g = random_layered_dag(rng)
        seg = segment_cross_level(g)
        levels, cross = depth_levels(seg)
        assert not cross
        depth = max(levels.values())
        order = sorted(seg.vertices)
        counts = {}
        for y in seg.roots:
            for x in seg.terminals:
                counts[(y, x)] = len(enumerate_paths(seg, y, x))
        # multiply adjacency matrices level by level
        by_level = {l: sorted(v for v in order if levels[v] == l) for l in range(depth + 1)}
        mat = {(v, v): 1 for v in by_level[0]}
        frontier = by_level[0]
        for l in range(depth):
            nxt = {}
            for (y, v), c in mat.items():
                for e in seg.out_edges(v):
                    nxt[(y, e.dst)] = nxt.get((y, e.dst), 0) + c
            keep = {}
            for (y, v), c in nxt.items():
                keep[(y, v)] = c
            mat = keep
        for y in seg.roots:
            for x in seg.terminals:
                assert counts[(y, x)] == mat.get((y, x), 0)
                assert counts[(y, x)] == count_paths(seg, y, x)
