import random
from pathlib import Path

import pytest

from jacfact.expr import (
    ExprSet,
    Sym,
    add,
    canonical,
    expand_expr,
    fma_cost,
    free_symbols,
    normalize,
    parse_exprset,
    prod,
)
from jacfact.graph import DiffGraph, Edge, parse_graph

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_graph(name):
    return parse_graph((FIXTURES / f"{name}.graph").read_text())


def load_exprset(name):
    return parse_exprset((FIXTURES / f"{name}.exprs").read_text())


@pytest.fixture
def fig4a():
    return load_graph("fig4a")


@pytest.fixture
def fig4b():
    return load_graph("fig4b")


@pytest.fixture
def fig9a():
    return load_graph("fig9a")


def random_layered_dag(rng, max_vertices=10, max_edges=16):
    """Connected-ish layered DAG: every non-root has an in-edge, every
    non-terminal an out-edge, optional cross-level extras."""
    n_levels = rng.randint(2, 4)
    total = rng.randint(n_levels, max_vertices)
    sizes = [1] * n_levels
    for _ in range(total - n_levels):
        sizes[rng.randrange(n_levels)] += 1
    levels = []
    n = 0
    for size in sizes:
        levels.append([f"n{n + i}" for i in range(size)])
        n += size
    pairs = set()
    for li in range(1, n_levels):
        for v in levels[li]:
            src_level = rng.randrange(li)
            pairs.add((rng.choice(levels[src_level]), v))
    for li in range(n_levels - 1):
        for v in levels[li]:
            if not any(p == v for p, _ in pairs):
                dst_level = rng.randrange(li + 1, n_levels)
                pairs.add((v, rng.choice(levels[dst_level])))
    flat = [v for lv in levels for v in lv]
    index = {v: i for i, v in enumerate(flat)}
    extra = rng.randint(0, max_edges)
    for _ in range(extra):
        if len(pairs) >= max_edges:
            break
        a, b = rng.sample(flat, 2)
        if index[a] > index[b]:
            a, b = b, a
        level_of = {v: li for li, lv in enumerate(levels) for v in lv}
        if level_of[a] == level_of[b]:
            continue
        if level_of[a] > level_of[b]:
            a, b = b, a
        pairs.add((a, b))
    edges = [
        Edge(f"g{i}", a, b, f"g{i}") for i, (a, b) in enumerate(sorted(pairs))
    ]
    return DiffGraph(edges)


def restrict_exprset(s, pairs):
    """Entries for the given pairs plus the definitions they reach."""
    keep = set(map(tuple, pairs))
    out = ExprSet()
    needed = set()
    entries = [(p, e) for p, e in s.entries if tuple(p) in keep]
    frontier = set()
    for _, e in entries:
        frontier |= free_symbols(e)
    dm = s.def_map
    while frontier:
        name = frontier.pop()
        if name in dm and name not in needed:
            needed.add(name)
            frontier |= free_symbols(dm[name])
    for name, e in s.defs:
        if name in needed:
            out.define(name, e)
    for (r, t), e in entries:
        out.add_entry(r, t, e)
    return out


def sets_match_up_to_naming(mine, reference):
    """Structural match of two expression sets up to reference renaming and
    the order of sum terms.  Requires a bijection between the definitions the
    entries reach, matching expanded forms, matching entries after renaming,
    and identical multiplication counts (same sharing)."""
    pairs = [p for p, _ in reference.entries]
    mine = restrict_exprset(mine, pairs)
    if fma_cost(mine) != fma_cost(reference):
        return False, f"cost {fma_cost(mine)} != {fma_cost(reference)}"
    my_dm, ref_dm = mine.def_map, reference.def_map

    def key(e, dm):
        from jacfact.expr import format_expr

        return format_expr(canonical(expand_expr(e, dm)))

    ref_by_key = {}
    for name, e in reference.defs:
        ref_by_key.setdefault(key(e, ref_dm), []).append(name)
    rename = {}
    for name, e in mine.defs:
        k = key(e, my_dm)
        if k not in ref_by_key or not ref_by_key[k]:
            return False, f"definition {name} = {k} has no counterpart"
        rename[name] = ref_by_key[k].pop(0)
    leftovers = [n for ns in ref_by_key.values() for n in ns]
    if leftovers:
        return False, f"unmatched reference definitions: {leftovers}"

    def renamed(e):
        if isinstance(e, Sym):
            return Sym(rename.get(e.name, e.name))
        from jacfact.expr import Prod, Sum

        if isinstance(e, Prod):
            return prod(*[renamed(f) for f in e.factors])
        if isinstance(e, Sum):
            return add(*[renamed(t) for t in e.terms])
        return e

    ref_entries = reference.entry_map()
    my_entries = {tuple(p): e for p, e in mine.entries}
    for pair, ref_e in ref_entries.items():
        if tuple(pair) not in my_entries:
            return False, f"missing entry {pair}"
        if canonical(renamed(my_entries[tuple(pair)])) != canonical(ref_e):
            return False, f"entry {pair} differs"
    for name, e in mine.defs:
        target = rename[name]
        if canonical(renamed(e)) != canonical(ref_dm[target]):
            return False, f"definition {name} differs from {target}"
    return True, "ok"


def lg_value(lg, inst):
    """Independent line-graph semantics: per (root, terminal), the sum over
    all source-to-sink paths of the product of vertex labels."""
    from jacfact.oracle import PRIME, eval_expr

    src_of = {vid: r for r, vid in lg.sources.items()}
    sink_of = {vid: t for t, vid in lg.sinks.items()}
    out = {}

    def walk(vid, acc):
        v = lg.vertices[vid]
        if v.kind == "sink":
            return {(sink_of[vid],): acc}
        total = {}
        if v.kind == "label":
            acc = acc * eval_expr(v.label, inst) % PRIME
        for s in sorted(v.succs):
            for k, val in walk(s, acc).items():
                total[k] = (total.get(k, 0) + val) % PRIME
        return total

    for r, vid in sorted(lg.sources.items()):
        for key, val in walk(vid, 1).items():
            out[(r, key[0])] = val
    return out
