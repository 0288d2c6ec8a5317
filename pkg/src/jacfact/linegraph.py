"""Directed line graph and the face-elimination engine.

Every edge of the underlying graph becomes a labeled vertex; two vertices are
joined when their edges meet head-to-tail, so each intermediate graph vertex
induces a complete bipartite subgraph.  Meta source/sink vertices stand for
the roots and terminals and are never eliminated.  Eliminating a face is one
multiplication; absorption, fillin (with in-place reuse when a side has a
single neighbor), merging of duplicate vertices, and removal of dead vertices
follow the classical rules, plus the subset/superset extended rewrites.

Replaying a recorded trace on the initial line graph reproduces the final
one; the sum of per-step multiplication flags is the cost of the run.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .expr import UNIT, Expr, Sym, _Unit, add, canonical, expand_expr, format_expr, prod
from .graph import UNIT_LABEL


class FaceError(ValueError):
    pass


class IncompleteElimination(FaceError):
    pass


@dataclass(eq=False)
class LGVertex:
    vid: int
    label: object  # Expr for labeled vertices, None for meta
    kind: str  # 'label', 'source', 'sink'
    graph_vertex: str = None
    preds: set = field(default_factory=set)
    succs: set = field(default_factory=set)


@dataclass
class EliminationStep:
    kind: str
    face: tuple = None  # (vid, vid)
    operands: tuple = None  # formatted labels of the face
    created: tuple = ()
    updated: tuple = ()
    removed: tuple = ()
    mult: int = 0

    def record(self):
        return {
            "kind": self.kind,
            "face": list(self.face) if self.face else None,
            "operands": list(self.operands) if self.operands else None,
            "created": list(self.created),
            "updated": list(self.updated),
            "removed": list(self.removed),
            "mult": self.mult,
        }


class LineGraph:
    def __init__(self):
        self.vertices = {}
        self.sources = {}  # root vertex id -> lg vid
        self.sinks = {}  # terminal vertex id -> lg vid
        self._next = 0

    def add_vertex(self, label, kind="label", graph_vertex=None):
        self._next += 1
        v = LGVertex(self._next, label, kind, graph_vertex)
        self.vertices[self._next] = v
        return self._next

    def add_edge(self, i, j):
        self.vertices[i].succs.add(j)
        self.vertices[j].preds.add(i)

    def remove_edge(self, i, j):
        self.vertices[i].succs.discard(j)
        self.vertices[j].preds.discard(i)

    def remove_vertex(self, i):
        v = self.vertices.pop(i)
        for p in list(v.preds):
            self.vertices[p].succs.discard(i)
        for s in list(v.succs):
            self.vertices[s].preds.discard(i)

    def has_edge(self, i, j):
        return j in self.vertices.get(i, LGVertex(0, None, "label")).succs

    def labeled(self):
        return [v for _, v in sorted(self.vertices.items()) if v.kind == "label"]

    def intermediate_faces(self):
        faces = []
        for v in self.labeled():
            for s in sorted(v.succs):
                if self.vertices[s].kind == "label":
                    faces.append((v.vid, s))
        return faces

    def find_by_label(self, target):
        want = canonical(target)
        return [v.vid for v in self.labeled() if canonical(v.label) == want]

    def copy(self):
        out = LineGraph()
        out._next = self._next
        for vid, v in self.vertices.items():
            out.vertices[vid] = LGVertex(
                vid, v.label, v.kind, v.graph_vertex, set(v.preds), set(v.succs)
            )
        out.sources = dict(self.sources)
        out.sinks = dict(self.sinks)
        return out


def build_line_graph(g):
    """Line graph of a differentiation graph, with meta sources and sinks."""
    lg = LineGraph()
    by_edge = {}
    for e in g.edges:
        label = UNIT if e.label == UNIT_LABEL else Sym(e.label)
        by_edge[e.id] = lg.add_vertex(label)
    for a in g.edges:
        for b in g.out_edges(a.dst):
            lg.add_edge(by_edge[a.id], by_edge[b.id])
    for r in g.roots:
        s = lg.add_vertex(None, "source", r)
        lg.sources[r] = s
        for e in g.out_edges(r):
            lg.add_edge(s, by_edge[e.id])
    for t in g.terminals:
        s = lg.add_vertex(None, "sink", t)
        lg.sinks[t] = s
        for e in g.in_edges(t):
            lg.add_edge(by_edge[e.id], s)
    return lg


def _mult_flag(a, b):
    return 0 if isinstance(a, _Unit) or isinstance(b, _Unit) else 1


def _cleanup(lg, affected, full_scan=False):
    """Dead-vertex removal and duplicate merging, cascaded to fixpoint."""
    steps = []
    queue = sorted(set(affected))
    alive = lambda i: i in lg.vertices
    while queue:
        i = queue.pop(0)
        if not alive(i) or lg.vertices[i].kind != "label":
            continue
        v = lg.vertices[i]
        if not v.preds or not v.succs:
            neighbors = sorted((v.preds | v.succs) - {i})
            lg.remove_vertex(i)
            steps.append(EliminationStep("remove-isolated", removed=(i,)))
            queue.extend(n for n in neighbors if alive(n))
            continue
        if full_scan:
            candidates = [w.vid for w in lg.labeled() if w.vid != i]
        else:
            candidates = set()
            for n in v.preds:
                candidates |= lg.vertices[n].succs
            for n in v.succs:
                candidates |= lg.vertices[n].preds
            candidates = sorted(candidates - {i})
        for j in candidates:
            if not alive(j) or not alive(i):
                break
            w = lg.vertices.get(j)
            if w is None or w.kind != "label":
                continue
            if w.preds == v.preds and w.succs == v.succs:
                v.label = add(v.label, w.label)
                lg.remove_vertex(j)
                steps.append(EliminationStep("merge", updated=(i,), removed=(j,)))
                queue.append(i)
    return steps


def eliminate_face(lg, i, j, full_scan=False):
    """Eliminate the intermediate face (i, j); returns the recorded steps."""
    for vid in (i, j):
        if vid not in lg.vertices:
            raise FaceError(f"no vertex {vid}")
        if lg.vertices[vid].kind != "label":
            raise FaceError("faces touching meta vertices cannot be eliminated")
    if not lg.has_edge(i, j):
        raise FaceError(f"face ({i}, {j}) not present")
    vi, vj = lg.vertices[i], lg.vertices[j]
    product = prod(vi.label, vj.label)
    ops = (format_expr(vi.label), format_expr(vj.label))
    mult = _mult_flag(vi.label, vj.label)
    steps = []
    absorber = None
    for k in lg.labeled():
        if k.vid in (i, j):
            continue
        if k.preds == vi.preds and k.succs == vj.succs:
            absorber = k
            break
    if absorber is not None:
        absorber.label = add(absorber.label, product)
        lg.remove_edge(i, j)
        steps.append(
            EliminationStep("absorb", (i, j), ops, updated=(absorber.vid,), mult=mult)
        )
        affected = [i, j, absorber.vid]
    elif vi.succs == {j}:
        lg.remove_edge(i, j)
        vi.label = product
        for s in sorted(vj.succs):
            lg.add_edge(i, s)
        steps.append(EliminationStep("fillin-reuse-i", (i, j), ops, updated=(i,), mult=mult))
        affected = [i, j]
    elif vj.preds == {i}:
        lg.remove_edge(i, j)
        vj.label = product
        for p in sorted(vi.preds):
            lg.add_edge(p, j)
        steps.append(EliminationStep("fillin-reuse-j", (i, j), ops, updated=(j,), mult=mult))
        affected = [i, j]
    else:
        k = lg.add_vertex(product)
        for p in sorted(vi.preds):
            lg.add_edge(p, k)
        for s in sorted(vj.succs):
            lg.add_edge(k, s)
        lg.remove_edge(i, j)
        steps.append(EliminationStep("fillin", (i, j), ops, created=(k,), mult=mult))
        affected = [i, j, k]
    steps.extend(_cleanup(lg, affected, full_scan))
    return steps


# ---------------------------------------------------------------------------
# extended subset/superset rewrites


def extended_rewrite(lg, rule, i, j=None, k=None, full_scan=False):
    """Subset/superset variants of absorption, fillin and merge.

    Conditions are checked exactly as stated; when the subset or superset
    degenerates to equality the plain rule applies instead.  The operator is
    responsible for invoking a variant only where the remaining flows keep
    the accumulated values intact (the interior-split reading).
    """
    if rule in ("merge-p-superset", "merge-s-superset"):
        vi, vk = lg.vertices[i], lg.vertices[k]
        if rule == "merge-p-superset":
            if not (vk.preds >= vi.preds and vk.succs == vi.succs):
                raise FaceError("merge-p-superset condition violated")
            if vk.preds == vi.preds:
                vi.label = add(vi.label, vk.label)
                lg.remove_vertex(k)
                return [EliminationStep("merge", updated=(i,), removed=(k,))]
            vi.label = add(vi.label, vk.label)
            for p in sorted(vi.preds):
                lg.remove_edge(p, k)
        else:
            if not (vk.preds == vi.preds and vk.succs >= vi.succs):
                raise FaceError("merge-s-superset condition violated")
            if vk.succs == vi.succs:
                vi.label = add(vi.label, vk.label)
                lg.remove_vertex(k)
                return [EliminationStep("merge", updated=(i,), removed=(k,))]
            vi.label = add(vi.label, vk.label)
            for s in sorted(vi.succs):
                lg.remove_edge(k, s)
        steps = [EliminationStep("extended-merge-superset", updated=(i, k))]
        steps.extend(_cleanup(lg, [i, k], full_scan))
        return steps

    if not lg.has_edge(i, j):
        raise FaceError(f"face ({i}, {j}) not present")
    vi, vj, vk = lg.vertices[i], lg.vertices[j], lg.vertices[k]
    product = prod(vi.label, vj.label)
    ops = (format_expr(vi.label), format_expr(vj.label))
    mult = _mult_flag(vi.label, vj.label)

    if rule == "absorb-s-subset":
        if not (vk.preds == vi.preds and vk.succs <= vj.succs):
            raise FaceError("absorb-s-subset condition violated")
        if vk.succs == vj.succs:
            return eliminate_face(lg, i, j, full_scan)
        vk.label = add(vk.label, product)
        for s in sorted(vk.succs):
            lg.remove_edge(j, s)
        steps = [EliminationStep("extended-absorb-subset", (i, j), ops,
                                 updated=(k,), mult=mult)]
        steps.extend(_cleanup(lg, [i, j, k], full_scan))
        return steps

    if rule == "absorb-p-subset":
        if not (vk.preds <= vi.preds and vk.succs == vj.succs):
            raise FaceError("absorb-p-subset condition violated")
        if vk.preds == vi.preds:
            return eliminate_face(lg, i, j, full_scan)
        vk.label = add(vk.label, product)
        for p in sorted(vk.preds):
            lg.remove_edge(p, i)
        steps = [EliminationStep("extended-absorb-subset", (i, j), ops,
                                 updated=(k,), mult=mult)]
        steps.extend(_cleanup(lg, [i, j, k], full_scan))
        return steps

    if rule in ("fillin-s-superset", "fillin-p-superset"):
        if rule == "fillin-s-superset":
            if not (vk.preds == vi.preds and vk.succs >= vj.succs):
                raise FaceError("fillin-s-superset condition violated")
            if vk.succs == vj.succs:
                return eliminate_face(lg, i, j, full_scan)
            shrink = lambda: [lg.remove_edge(k, s) for s in sorted(vj.succs & vk.succs)]
        else:
            if not (vk.preds >= vi.preds and vk.succs == vj.succs):
                raise FaceError("fillin-p-superset condition violated")
            if vk.preds == vi.preds:
                return eliminate_face(lg, i, j, full_scan)
            shrink = lambda: [lg.remove_edge(p, k) for p in sorted(vi.preds & vk.preds)]
        combined = add(product, vk.label)
        if len(vi.succs) > 1 and len(vj.preds) > 1:
            new = lg.add_vertex(combined)
            for p in sorted(vi.preds):
                lg.add_edge(p, new)
            for s in sorted(vj.succs):
                lg.add_edge(new, s)
            shrink()
            lg.remove_edge(i, j)
            steps = [EliminationStep("extended-fillin-superset", (i, j), ops,
                                     created=(new,), mult=mult)]
            affected = [i, j, k, new]
        elif len(vi.succs) == 1:
            lg.remove_edge(i, j)
            vi.label = combined
            for s in sorted(vj.succs):
                lg.add_edge(i, s)
            shrink()
            steps = [EliminationStep("extended-fillin-superset", (i, j), ops,
                                     updated=(i,), mult=mult)]
            affected = [i, j, k]
        else:  # |P_j| == 1
            lg.remove_edge(i, j)
            vj.label = combined
            for p in sorted(vi.preds):
                lg.add_edge(p, j)
            shrink()
            steps = [EliminationStep("extended-fillin-superset", (i, j), ops,
                                     updated=(j,), mult=mult)]
            affected = [i, j, k]
        steps.extend(_cleanup(lg, affected, full_scan))
        return steps

    raise FaceError(f"unknown rule {rule}")


# ---------------------------------------------------------------------------
# driving an elimination


def resolve_vertex(lg, spec, defs=None):
    """Find the labeled vertex currently holding a value.

    `spec` is a vertex id, an expression, or a symbol name; names that match
    a definition resolve to the definition's expanded expression.
    """
    if isinstance(spec, int):
        if spec not in lg.vertices:
            raise FaceError(f"no vertex {spec}")
        return spec
    if isinstance(spec, str):
        target = expand_expr(Sym(spec), defs or {})
    elif isinstance(spec, Expr):
        target = expand_expr(spec, defs or {})
    else:
        raise FaceError(f"cannot resolve {spec!r}")
    hits = lg.find_by_label(target)
    if not hits:
        raise FaceError(f"no vertex labeled {format_expr(target)}")
    return hits[0]


def run_elimination(lg, order, defs=None, allow_extended=False, full_scan=False):
    """Apply a face order; returns the full trace.

    Order entries are (a, b) pairs resolved by value, or explicit rule
    records ``(rule, ...)`` when extended rewrites are allowed.
    """
    trace = []
    for entry in order:
        if allow_extended and entry and isinstance(entry[0], str) and entry[0].startswith(
            ("absorb-", "fillin-", "merge-")
        ):
            rule, *args = entry
            ids = [resolve_vertex(lg, a, defs) for a in args]
            trace.extend(extended_rewrite(lg, rule, *ids, full_scan=full_scan))
            continue
        a, b = entry
        i = resolve_vertex(lg, a, defs)
        j = resolve_vertex(lg, b, defs)
        trace.extend(eliminate_face(lg, i, j, full_scan))
    return trace


def trace_mult_count(trace):
    return sum(step.mult for step in trace)


def readout_jacobian(lg):
    """Entries after a complete elimination: per (root, terminal), the sum of
    labels of vertices wired to that source and sink."""
    remaining = lg.intermediate_faces()
    if remaining:
        raise IncompleteElimination(f"{len(remaining)} intermediate faces remain")
    src_of = {vid: r for r, vid in lg.sources.items()}
    sink_of = {vid: t for t, vid in lg.sinks.items()}
    out = {}
    for v in lg.labeled():
        for p in sorted(v.preds):
            for s in sorted(v.succs):
                pair = (src_of[p], sink_of[s])
                out[pair] = add(out[pair], v.label) if pair in out else v.label
    return out


def line_graph_dot(lg):
    lines = ["digraph linegraph {"]
    for vid, v in sorted(lg.vertices.items()):
        if v.kind == "label":
            lines.append(f'  n{vid} [label="{format_expr(v.label)}"];')
        else:
            shape = "invtriangle" if v.kind == "source" else "triangle"
            lines.append(f'  n{vid} [label="{v.graph_vertex}", shape={shape}];')
    for vid, v in sorted(lg.vertices.items()):
        for s in sorted(v.succs):
            lines.append(f"  n{vid} -> n{s};")
    lines.append("}")
    return "\n".join(lines) + "\n"
