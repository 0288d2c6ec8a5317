"""Labeled differentiation-graph model and its basic queries.

A graph is a rooted multi-level DAG whose directed edges point in the
direction of dependence (roots at the top, terminals at the bottom).  Each
edge carries a symbolic label; the label ``1`` marks a unit edge inserted by
cross-level segmentation.  All queries here are pure functions over immutable
graphs, so instances can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass

UNIT_LABEL = "1"
DEFAULT_PATH_GUARD = 10**6


class GraphError(ValueError):
    pass


class GraphParseError(GraphError):
    pass


class PathGuardExceeded(GraphError):
    """Path enumeration grew beyond the configured guard limit."""


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    label: str


class DiffGraph:
    """Immutable directed acyclic graph with labeled edges.

    Vertex and edge ids are opaque strings; deterministic outputs use
    lexicographic order.  At most one edge may connect an ordered vertex
    pair.
    """

    def __init__(self, edges, extra_vertices=()):
        edges = list(edges)
        if not edges:
            raise GraphError("empty edge list")
        seen_ids = set()
        seen_pairs = set()
        for e in edges:
            if e.id in seen_ids:
                raise GraphError(f"duplicate edge id {e.id}")
            seen_ids.add(e.id)
            if (e.src, e.dst) in seen_pairs:
                raise GraphError(f"duplicate edge between {e.src} and {e.dst}")
            seen_pairs.add((e.src, e.dst))
            if e.src == e.dst:
                raise GraphError(f"self loop on {e.src}")
        self.edges = tuple(edges)
        verts = set(extra_vertices)
        for e in edges:
            verts.add(e.src)
            verts.add(e.dst)
        self.vertices = frozenset(verts)
        self._succ = {v: [] for v in verts}
        self._pred = {v: [] for v in verts}
        for e in edges:
            self._succ[e.src].append(e)
            self._pred[e.dst].append(e)
        self._edge_by_id = {e.id: e for e in edges}
        self._toposort()  # raises on cycles

    # -- basic accessors ----------------------------------------------------

    def out_edges(self, v):
        return tuple(self._succ[v])

    def in_edges(self, v):
        return tuple(self._pred[v])

    def edge(self, edge_id):
        try:
            return self._edge_by_id[edge_id]
        except KeyError:
            raise GraphError(f"unknown edge id {edge_id}") from None

    def has_vertex(self, v):
        return v in self.vertices

    @property
    def roots(self):
        return tuple(sorted(v for v in self.vertices if not self._pred[v]))

    @property
    def terminals(self):
        return tuple(sorted(v for v in self.vertices if not self._succ[v]))

    def _toposort(self):
        indeg = {v: len(self._pred[v]) for v in self.vertices}
        queue = sorted(v for v, d in indeg.items() if d == 0)
        order = []
        while queue:
            v = queue.pop(0)
            order.append(v)
            added = []
            for e in self._succ[v]:
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    added.append(e.dst)
            if added:
                queue = sorted(queue + added)
        if len(order) != len(self.vertices):
            stuck = sorted(v for v, d in indeg.items() if d > 0)
            raise GraphError(f"cycle detected involving {', '.join(stuck)}")
        self.topo_order = tuple(order)

    def reachable_from(self, v):
        """All vertices reachable from v by directed paths of length >= 1."""
        out = set()
        stack = [e.dst for e in self._succ[v]]
        while stack:
            u = stack.pop()
            if u in out:
                continue
            out.add(u)
            stack.extend(e.dst for e in self._succ[u])
        return out

    def reaching(self, v):
        """All vertices with a directed path of length >= 1 to v."""
        out = set()
        stack = [e.src for e in self._pred[v]]
        while stack:
            u = stack.pop()
            if u in out:
                continue
            out.add(u)
            stack.extend(e.src for e in self._pred[u])
        return out


# ---------------------------------------------------------------------------
# text format: `e <edge-id> <src> <dst> [<label>]`


def parse_graph(text):
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "e" or len(parts) not in (4, 5):
            raise GraphParseError(
                f"line {lineno}: expected 'e <id> <src> <dst> [<label>]'"
            )
        eid, src, dst = parts[1:4]
        label = parts[4] if len(parts) == 5 else eid
        edges.append(Edge(eid, src, dst, label))
    try:
        return DiffGraph(edges)
    except GraphError as exc:
        raise GraphParseError(str(exc)) from exc


def format_graph(g):
    lines = []
    for e in g.edges:
        if e.label == e.id:
            lines.append(f"e {e.id} {e.src} {e.dst}")
        else:
            lines.append(f"e {e.id} {e.src} {e.dst} {e.label}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# queries


def classify_vertices(g):
    """Partition into (roots Y, intermediates Z, terminals X)."""
    y = g.roots
    x = g.terminals
    z = tuple(sorted(g.vertices - set(y) - set(x)))
    return y, z, x


def enumerate_paths(g, frm, to, guard=DEFAULT_PATH_GUARD):
    """All directed paths from `frm` to `to` as tuples of edge ids.

    Deterministic: depth-first with out-edges taken in edge-id order, which
    yields paths sorted lexicographically by their edge-id sequence.
    """
    for v in (frm, to):
        if not g.has_vertex(v):
            raise GraphError(f"unknown vertex {v}")
    paths = []
    stack = []

    def walk(v):
        if v == to and stack:
            paths.append(tuple(stack))
            if len(paths) > guard:
                raise PathGuardExceeded(
                    f"more than {guard} paths between {frm} and {to}"
                )
            return
        for e in sorted(g.out_edges(v), key=lambda e: e.id):
            stack.append(e.id)
            walk(e.dst)
            stack.pop()

    walk(frm)
    return paths


def count_paths(g, frm, to):
    """Number of directed paths from `frm` to `to` (dynamic programming)."""
    counts = {to: 1}
    for v in reversed(g.topo_order):
        if v == to:
            continue
        counts[v] = sum(counts.get(e.dst, 0) for e in g.out_edges(v))
    return counts.get(frm, 0)


def depth_levels(g):
    """Depth levels plus the set of cross-level edge ids.

    Roots sit at level 0 and an intermediate's level is the length of the
    longest root path to it.  All terminals share the last level, the depth
    of the graph.  An edge is cross-level when it spans more than one level.
    """
    levels = {}
    for v in g.topo_order:
        preds = g.in_edges(v)
        levels[v] = 0 if not preds else 1 + max(levels[e.src] for e in preds)
    terminals = g.terminals
    depth = max(levels[t] for t in terminals)
    for t in terminals:
        levels[t] = depth
    cross = {e.id for e in g.edges if levels[e.dst] - levels[e.src] > 1}
    return levels, cross


def rt_degrees(g):
    """Per vertex: (#roots that reach it, #terminals it reaches).

    Paths of length >= 1, so roots have r-degree 0 and terminals t-degree 0.
    """
    roots = set(g.roots)
    terminals = set(g.terminals)
    r = {v: set() for v in g.vertices}
    for v in g.topo_order:
        for e in g.in_edges(v):
            if e.src in roots:
                r[v].add(e.src)
            r[v] |= r[e.src]
    t = {v: set() for v in g.vertices}
    for v in reversed(g.topo_order):
        for e in g.out_edges(v):
            if e.dst in terminals:
                t[v].add(e.dst)
            t[v] |= t[e.dst]
    return {v: (len(r[v]), len(t[v])) for v in g.vertices}


def roots_reaching(g, v):
    roots = set(g.roots)
    if v in roots:
        return set()
    return {u for u in g.reaching(v) if u in roots}


def terminals_reachable(g, v):
    terms = set(g.terminals)
    if v in terms:
        return set()
    return {u for u in g.reachable_from(v) if u in terms}


def overlap_degree(g, paths, edge_id):
    """Number of paths in `paths` that pass through the given edge."""
    g.edge(edge_id)
    return sum(1 for p in paths if edge_id in p)


def inout_paths(g, v):
    """All length-2 paths through an intermediate vertex."""
    return [
        (a.id, b.id)
        for a in sorted(g.in_edges(v), key=lambda e: e.id)
        for b in sorted(g.out_edges(v), key=lambda e: e.id)
    ]


def subgraph_between(g, src, sink):
    """Subgraph induced by all paths from src to sink; None when unreachable.

    Keeps the original edge order so downstream conversions are stable.
    """
    if not g.has_vertex(src) or not g.has_vertex(sink):
        raise GraphError(f"unknown vertex {src if not g.has_vertex(src) else sink}")
    below = g.reachable_from(src) | {src}
    above = g.reaching(sink) | {sink}
    keep = below & above
    if src not in keep or sink not in keep:
        return None
    edges = [e for e in g.edges if e.src in keep and e.dst in keep]
    if not edges:
        return None
    return DiffGraph(edges)


def restricted_to_paths(g, edge_ids):
    """Subgraph with exactly the given edges (order preserved)."""
    keep = set(edge_ids)
    edges = [e for e in g.edges if e.id in keep]
    if not edges:
        return None
    return DiffGraph(edges)
