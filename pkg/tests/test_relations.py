import pytest

from jacfact.expr import fma_cost, parse_exprset
from jacfact.graph import DiffGraph, parse_graph
from jacfact.linegraph import build_line_graph, readout_jacobian, run_elimination, trace_mult_count
from jacfact.oracle import check_equiv
from jacfact.relations import (
    CircularDependencyError,
    build_dep_graph,
    classify_relations,
    detect_cycles,
    face_key,
    lemma1_audit,
    safe_elimination_order,
    table_json,
)

from conftest import load_exprset, load_graph


@pytest.fixture
def sec5():
    return load_exprset("sec5set")


def _occs(table, pair):
    return table.get(pair, [])


def test_classify_direct_and_indirect_e4_e8(sec5):
    table = classify_relations(sec5)
    occs = _occs(table, ("e4", "e8"))
    kinds = {(o.kind, o.site, o.witness) for o in occs}
    assert ("direct", "J[v-2,v12]", None) in kinds
    assert ("indirect-right", "s5", "e11") in kinds


def test_classify_single_direct():
    s = parse_exprset("J[y,x] = a*b\n")
    table = classify_relations(s)
    assert [(o.kind, o.site) for o in table[("a", "b")]] == [("direct", "J[y,x]")]


def test_classify_indirect_left(sec5):
    table = classify_relations(sec5)
    occs = _occs(table, ("e8", "e15"))
    # direct in J[v-3,v12] = e19*e5*e8*e15, indirect behind (s1+e4*e8)
    assert {(o.kind, o.witness) for o in occs} == {
        ("indirect-left", "e4"),
        ("direct", None),
    }
    # witness-less indirect through the bare s1 term
    occs = _occs(table, ("e18", "s1"))
    assert ("indirect-right", None) in {(o.kind, o.witness) for o in occs}


def test_classify_exhaustive_direct_count(sec5):
    table = classify_relations(sec5)
    direct = sum(
        1 for occs in table.values() for o in occs if o.kind == "direct"
    )
    assert direct == fma_cost(sec5) == 26
    for name in ("eq1", "eq2", "eq5"):
        s = load_exprset(name)
        t = classify_relations(s)
        d = sum(1 for occs in t.values() for o in occs if o.kind == "direct")
        assert d == fma_cost(s)


def test_table_json(sec5):
    j = table_json(classify_relations(sec5))
    assert "e4 | e8" in j


def test_lemma1_zero_violations(sec5):
    assert lemma1_audit(sec5) == []


def test_lemma1_flags_reducible_set():
    s = parse_exprset("J[y,x1] = a*(b+c)\nJ[y,x2] = d*(a*b+e)\n")
    violations = lemma1_audit(s)
    assert len(violations) == 1
    assert violations[0]["pair"] == ["a", "b"]


def test_lemma1_direct_only_clean():
    s = parse_exprset("J[y,x] = a*b*c\nJ[y,x2] = a*b*d\n")
    assert lemma1_audit(s) == []


def test_dep_graph_edges(sec5):
    d = build_dep_graph(sec5)
    assert ("e8", "e11") in d.successors(("e4", "e8"))
    assert ("e9", "e12") in d.successors(("e4", "e9"))
    assert set(d.successors(("e18", "e4"))) == {("e4", "s4"), ("e4", "e8")}
    assert d.successors(("e8", "e11")) == []
    assert d.successors(("e9", "e12")) == []
    assert detect_cycles(d) == []
    dot = d.to_dot()
    assert '"e4,e8" -> "e8,e11"' in dot


def test_dep_graph_direct_only_empty():
    s = parse_exprset("J[y,x] = a*b*c\n")
    d = build_dep_graph(s)
    assert d.edges == []
    assert detect_cycles(d) == []


def test_mirrored_dependency():
    s = parse_exprset("J[y,x1] = (d+w*a)*b\nJ[y,x2] = a*b*c\n")
    d = build_dep_graph(s)
    edges = [(x, y, m) for x, y, m in d.edges]
    assert (("a", "b"), ("w", "a"), True) in edges


def test_cycle_example_has_one_cycle():
    cyc = load_exprset("cyclic8")
    d = build_dep_graph(cyc)
    cycles = detect_cycles(d)
    assert len(cycles) == 1
    assert len(cycles[0]) == 8
    with pytest.raises(CircularDependencyError) as err:
        safe_elimination_order(cyc)
    assert err.value.cycles == cycles


def test_safe_order_starts_with_free_faces(sec5):
    order = safe_elimination_order(sec5)
    keys = [(face_key(a), face_key(b)) for a, b in order]
    assert keys[0] == ("e8", "e11")
    assert keys[1] == ("e9", "e12")
    assert len(order) == fma_cost(sec5)


def test_safe_order_replays_exactly(sec5, fig9a):
    page = DiffGraph(
        [e for e in fig9a.edges if e.id not in ("e0", "e17", "e1", "e2")]
    )
    order = safe_elimination_order(sec5)
    lg = build_line_graph(page)
    trace = run_elimination(lg, order, defs=sec5.def_map)
    assert trace_mult_count(trace) == fma_cost(sec5) == 26
    entries = readout_jacobian(lg)
    assert set(entries) == set(sec5.entry_map())
    assert check_equiv(sec5, entries).ok


def test_safe_order_direct_only_topological():
    s = parse_exprset("J[y,x] = a*b*c\n")
    order = safe_elimination_order(s)
    keys = [(face_key(l), face_key(r)) for l, r in order]
    assert keys == [("a", "b"), ("a*b", "c")]  # left-to-right accumulation


def test_safe_order_eq5_replay(fig4b):
    s = load_exprset("eq5")
    order = safe_elimination_order(s)
    lg = build_line_graph(fig4b)
    trace = run_elimination(lg, order, defs=s.def_map)
    assert trace_mult_count(trace) == fma_cost(s) == 10
    assert check_equiv(s, readout_jacobian(lg)).ok


def test_safe_order_eq1_replay(fig4a):
    s = load_exprset("eq1")
    order = safe_elimination_order(s)
    lg = build_line_graph(fig4a)
    trace = run_elimination(lg, order, defs=s.def_map)
    assert trace_mult_count(trace) == 5
    assert check_equiv(s, readout_jacobian(lg)).ok


def test_cycles_empty_iff_safe_order_succeeds(sec5):
    assert detect_cycles(build_dep_graph(sec5)) == []
    safe_elimination_order(sec5)  # does not raise
