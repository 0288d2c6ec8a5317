"""Conversion between simple differentiation graphs and expressions.

A simple region (nested chains and simple blocks) converts to a single
parenthesized expression and back again; complex blocks have no expression
form and must be factorized first.
"""
from __future__ import annotations

from .expr import Prod, Sum, Sym, _Unit, normalize
from .graph import DiffGraph, Edge, UNIT_LABEL
from .structure import StructureError, region_expr


def graph_to_expr(g, src=None, sink=None):
    """Expression of the region between src and sink (defaults: the unique
    root and terminal).  Raises :class:`ComplexBlockError` on complex blocks.
    """
    if src is None or sink is None:
        roots, terminals = g.roots, g.terminals
        if len(roots) != 1 or len(terminals) != 1:
            raise StructureError(
                "graph has multiple roots or terminals; pass src and sink"
            )
        src = src or roots[0]
        sink = sink or terminals[0]
    return region_expr(g, src, sink)


class _GraphBuilder:
    def __init__(self):
        self.edges = []
        self.vcount = 0
        self.label_counts = {}
        self.pairs = set()

    def new_vertex(self):
        self.vcount += 1
        return f"v{self.vcount}"

    def add_edge(self, src, dst, label):
        if (src, dst) in self.pairs:
            raise StructureError(f"parallel edge between {src} and {dst}")
        self.pairs.add((src, dst))
        n = self.label_counts.get(label, 0) + 1
        self.label_counts[label] = n
        eid = label if n == 1 else f"{label}.{n}"
        self.edges.append(Edge(eid, src, dst, label))


def expr_to_graph(e):
    """Simple graph realizing the expression; converting back recovers the
    normalized input.

    Sum terms expand to parallel branches.  A bare-symbol term after the
    first gets a unit-padded waypoint so vertex pairs keep at most one edge;
    the padding is free and disappears on the way back.
    """
    e = normalize(e)
    b = _GraphBuilder()
    src = b.new_vertex()
    sink = b.new_vertex()
    _emit(b, e, src, sink, pad=False)
    return DiffGraph(b.edges)


def _emit(b, e, src, dst, pad):
    if isinstance(e, (Sym, _Unit)):
        label = UNIT_LABEL if isinstance(e, _Unit) else e.name
        if pad:
            mid = b.new_vertex()
            b.add_edge(src, mid, label)
            b.add_edge(mid, dst, UNIT_LABEL)
        else:
            b.add_edge(src, dst, label)
        return
    if isinstance(e, Prod):
        waypoints = [src] + [b.new_vertex() for _ in e.factors[:-1]] + [dst]
        for f, a, z in zip(e.factors, waypoints, waypoints[1:]):
            _emit(b, f, a, z, pad=False)
        return
    if isinstance(e, Sum):
        first_atom_used = False
        for t in e.terms:
            atom = isinstance(t, (Sym, _Unit))
            need_pad = atom and first_atom_used
            if atom and not first_atom_used:
                first_atom_used = True
            _emit(b, t, src, dst, pad=need_pad)
        return
    raise StructureError(f"not an expression: {e!r}")
