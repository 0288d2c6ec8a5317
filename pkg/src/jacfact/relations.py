"""Multiplication-relation analysis over an expression set.

Two symbols multiplied side by side form a direct relation; a symbol
multiplied against a parenthesized sum relates indirectly to the leading (or
trailing) symbol of each term, with the adjoining factor as witness.  A pair
that is direct in one place and indirect in another cannot be eliminated in
the line graph until the witnessed inner faces are gone; those constraints
form the dependency graph, whose cycles make a safe order impossible.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .expr import (
    Prod,
    Sum,
    Sym,
    _Unit,
    canonical,
    expand_expr,
    format_expr,
    free_symbols,
    normalize,
    prod,
)


class RelationError(ValueError):
    pass


class CircularDependencyError(RelationError):
    def __init__(self, cycles):
        listing = "; ".join(" -> ".join(map(str, c)) for c in cycles)
        super().__init__(f"circular elimination dependencies: {listing}")
        self.cycles = cycles


def face_key(e):
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, _Unit):
        return "1"
    return format_expr(canonical(e))


@dataclass
class Occurrence:
    site: str
    kind: str  # direct, indirect-right, indirect-left, distant
    witness: str = None

    def record(self):
        return {"site": self.site, "kind": self.kind, "witness": self.witness}


def _site_name(key):
    if isinstance(key, tuple):
        return f"J[{key[0]},{key[1]}]"
    return key


def _sum_view(f, defs):
    """Terms seen through a parenthesis, looking through one reference."""
    if isinstance(f, Sum):
        return f.terms
    if isinstance(f, Sym) and isinstance(defs.get(f.name), Sum):
        return defs[f.name].terms
    return None


def _leading(term):
    if isinstance(term, Sym):
        return term, None
    if isinstance(term, Prod):
        return term.factors[0], term.factors[1]
    return None, None


def _trailing(term):
    if isinstance(term, Sym):
        return term, None
    if isinstance(term, Prod):
        return term.factors[-1], term.factors[-2]
    return None, None


def classify_relations(s):
    """Relation table: (left key, right key) -> occurrences.

    Every multiplication in the set shows up as exactly one direct
    occurrence; indirect occurrences look through a single parenthesis
    boundary (including one reference whose definition is a sum) and deeper
    separations are reported as distant.
    """
    defs = s.def_map
    table = {}

    def note(left_key, right_key, occ):
        table.setdefault((left_key, right_key), []).append(occ)

    def walk(e, site):
        if isinstance(e, Sum):
            for t in e.terms:
                walk(t, site)
            return
        if not isinstance(e, Prod):
            return
        for f, g in zip(e.factors, e.factors[1:]):
            note(face_key(f), face_key(g), Occurrence(site, "direct"))
            rview = _sum_view(g, defs)
            if rview is not None and isinstance(f, Sym):
                for t in rview:
                    head, second = _leading(t)
                    if isinstance(head, Sym):
                        note(
                            f.name,
                            head.name,
                            Occurrence(
                                site,
                                "indirect-right",
                                face_key(second) if second is not None else None,
                            ),
                        )
                    elif head is not None:
                        tail, _ = _trailing(t)
                        if isinstance(tail, Sym):
                            note(f.name, tail.name, Occurrence(site, "distant"))
            lview = _sum_view(f, defs)
            if lview is not None and isinstance(g, Sym):
                for t in lview:
                    tail, before = _trailing(t)
                    if isinstance(tail, Sym):
                        note(
                            tail.name,
                            g.name,
                            Occurrence(
                                site,
                                "indirect-left",
                                face_key(before) if before is not None else None,
                            ),
                        )
            if rview is not None and lview is not None:
                for lt in lview:
                    tail, _ = _trailing(lt)
                    for rt in rview:
                        head, _ = _leading(rt)
                        if isinstance(tail, Sym) and isinstance(head, Sym):
                            note(tail.name, head.name, Occurrence(site, "distant"))
        for f in e.factors:
            walk(f, site)

    for key, e in s.all_exprs():
        walk(normalize(e), _site_name(key))
    return table


def table_json(table):
    return {
        f"{a} | {b}": [o.record() for o in occs] for (a, b), occs in sorted(table.items())
    }


def lemma1_audit(s):
    """Pairs that are direct somewhere and witness-less indirect elsewhere.

    Such a pair marks a set that is not an optimal calculation order: the
    sum could be regrouped to save a multiplication.
    """
    table = classify_relations(s)
    violations = []
    for pair, occs in sorted(table.items()):
        direct = [o for o in occs if o.kind == "direct"]
        bare = [
            o
            for o in occs
            if o.kind in ("indirect-right", "indirect-left") and o.witness is None
        ]
        if direct and bare:
            violations.append(
                {
                    "pair": list(pair),
                    "direct_sites": sorted({o.site for o in direct}),
                    "indirect_sites": sorted({o.site for o in bare}),
                }
            )
    return violations


@dataclass
class DepGraph:
    nodes: set = field(default_factory=set)
    edges: list = field(default_factory=list)  # (from_face, to_face, mirrored)

    def successors(self, face):
        return [b for a, b, _ in self.edges if a == face]

    def to_json(self):
        return {
            "nodes": sorted(map(list, self.nodes)),
            "edges": [
                {"from": list(a), "to": list(b), "mirrored": m}
                for a, b, m in self.edges
            ],
        }

    def to_dot(self):
        def nid(face):
            return f'"{face[0]},{face[1]}"'

        lines = ["digraph deps {"]
        for n in sorted(self.nodes):
            lines.append(f"  {nid(n)};")
        for a, b, m in self.edges:
            style = ' [style=dashed]' if m else ""
            lines.append(f"  {nid(a)} -> {nid(b)}{style};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_dep_graph(s):
    """Dependency edges per witnessed indirect occurrences.

    An edge (a, b) -> (b, w) says: the face (a, b) may only be eliminated
    after (b, w).  Mirrored edges (a, b) -> (w, a) come from left-side
    indirection and are flagged, since they follow by symmetry.
    """
    table = classify_relations(s)
    d = DepGraph()
    for (a, b), occs in sorted(table.items()):
        direct = [o for o in occs if o.kind == "direct"]
        indirect = [o for o in occs if o.kind.startswith("indirect")]
        if not (direct and indirect):
            continue
        face = (a, b)
        d.nodes.add(face)
        for o in indirect:
            if o.witness is None:
                continue
            target = (b, o.witness) if o.kind == "indirect-right" else (o.witness, a)
            d.nodes.add(target)
            edge = (face, target, o.kind == "indirect-left")
            if edge not in d.edges:
                d.edges.append(edge)
    return d


def detect_cycles(d):
    """All elementary cycles, each rotated to start at its smallest node."""
    g = nx.DiGraph()
    g.add_nodes_from(d.nodes)
    g.add_edges_from([(a, b) for a, b, _ in d.edges])
    cycles = []
    for cyc in nx.simple_cycles(g):
        k = cyc.index(min(cyc))
        cycles.append(tuple(cyc[k:] + cyc[:k]))
    return sorted(cycles)


# ---------------------------------------------------------------------------
# safe elimination order


@dataclass
class _Task:
    site: str
    seq: int
    face: tuple  # (left label Expr, right label Expr), expanded
    pair: tuple  # syntactic (left key, right key)


def _dep_depth(d):
    """Longest dependency path into each face (more depended-upon = deeper)."""
    g = nx.DiGraph()
    g.add_nodes_from(d.nodes)
    g.add_edges_from([(a, b) for a, b, _ in d.edges])
    depth = {}
    for n in nx.topological_sort(g):
        depth[n] = max((depth[p] + 1 for p in g.predecessors(n)), default=0)
    return depth


def safe_elimination_order(s):
    """Face order that replays the set without breaking any parenthesis.

    Faces that other faces depend on come first (deepest dependency targets
    lead), definitions precede the entries that use them, and products
    associate left to right.  Raises :class:`CircularDependencyError` when
    the dependency graph is cyclic.
    """
    d = build_dep_graph(s)
    cycles = detect_cycles(d)
    if cycles:
        raise CircularDependencyError(cycles)
    defs = s.def_map

    # order definition sites so that used definitions come first
    site_rank = {}
    remaining = dict(s.defs)
    placed = []
    while remaining:
        progress = False
        for name in list(remaining):
            e = remaining[name]
            if free_symbols(e) & set(remaining) - {name}:
                continue
            placed.append(name)
            del remaining[name]
            progress = True
        if not progress:
            raise CircularDependencyError([tuple(sorted(remaining))])
    for i, name in enumerate(placed):
        site_rank[name] = i
    base = len(placed)
    for i, (pair, _) in enumerate(s.entries):
        site_rank[_site_name(pair)] = base + i

    tasks = []

    def plan(e, site):
        if isinstance(e, (Sym, _Unit)):
            return expand_expr(e, defs)
        if isinstance(e, Sum):
            for t in e.terms:
                plan(t, site)
            return expand_expr(e, defs)
        if isinstance(e, Prod):
            labels = [plan(f, site) for f in e.factors]
            acc = labels[0]
            for prev, f, label in zip(e.factors, e.factors[1:], labels[1:]):
                tasks.append(
                    _Task(site, len(tasks), (acc, label), (face_key(prev), face_key(f)))
                )
                acc = prod(acc, label)
            return acc
        raise RelationError(f"not an expression: {e!r}")

    for name, e in s.defs:
        plan(normalize(e), name)
    for pair, e in s.entries:
        plan(normalize(e), _site_name(pair))

    depth = _dep_depth(d)
    deps_of = {}
    for a, b, _ in d.edges:
        deps_of.setdefault(a, set()).add(b)

    done_pairs = {}
    total_pairs = {}
    for t in tasks:
        total_pairs[t.pair] = total_pairs.get(t.pair, 0) + 1

    site_tasks = {}
    for t in tasks:
        site_tasks.setdefault(t.site, []).append(t)
    site_positions = {site: 0 for site in site_tasks}
    emitted = []

    def ready(t):
        for need in deps_of.get(t.pair, ()):
            if need in total_pairs and done_pairs.get(need, 0) < total_pairs[need]:
                return False
        return True

    pending = sum(len(v) for v in site_tasks.values())
    while pending:
        candidates = []
        for site, pos in site_positions.items():
            queue = site_tasks[site]
            if pos >= len(queue):
                continue
            t = queue[pos]
            if ready(t):
                candidates.append(t)
        if not candidates:
            stuck = [
                site_tasks[site][pos].pair
                for site, pos in site_positions.items()
                if pos < len(site_tasks[site])
            ]
            raise RelationError(f"no safe order; stuck on faces {stuck}")
        best = min(
            candidates,
            key=lambda t: (-depth.get(t.pair, 0), site_rank[t.site], t.seq),
        )
        site_positions[best.site] += 1
        pending -= 1
        done_pairs[best.pair] = done_pairs.get(best.pair, 0) + 1
        emitted.append(best)
    return [(t.face[0], t.face[1]) for t in emitted]
