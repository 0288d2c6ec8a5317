"""Recognition of chains, blocks and complex blocks, plus cross-level
segmentation.

Recognition works by iterated contraction: maximal single-track runs collapse
into chain edges, parallel edges merge into block edges, and the loop repeats
until nothing moves.  Regions that refuse to contract are complex blocks.
The same machinery produces the algebraic expression of a simple region and
the contracted degree view used by the factorization passes.
"""
from __future__ import annotations

from dataclasses import dataclass

from .expr import UNIT, Sym, add, prod
from .graph import DiffGraph, Edge, UNIT_LABEL, count_paths, depth_levels, subgraph_between


class StructureError(ValueError):
    pass


class ComplexBlockError(StructureError):
    """A region has no algebraic form; carries the offending (src, sink)."""

    def __init__(self, src, sink):
        super().__init__(f"complex block between {src} and {sink}")
        self.src = src
        self.sink = sink


@dataclass
class Structure:
    kind: str  # direct-simple-chain, indirect-simple-chain, complex-chain,
    #            direct-simple-block, indirect-simple-block, complex-block, edge
    src: str
    sink: str
    vertices: frozenset
    edges: frozenset

    def record(self):
        return {
            "kind": self.kind,
            "src": self.src,
            "sink": self.sink,
            "vertices": sorted(self.vertices),
            "edges": sorted(self.edges),
        }


@dataclass(eq=False)
class CEdge:
    """Contraction edge: an original edge or a substitute for a structure."""

    src: str
    dst: str
    expr: object  # Expr, or None inside complex substitutes
    kind: str  # 'edge', 'chain', 'block'
    simple: bool
    direct: bool
    vmembers: frozenset = frozenset()  # interior vertices only
    emembers: frozenset = frozenset()  # original edge ids
    original: Edge = None
    seq: int = 0
    record_idx: int = -1
    branches: tuple = ()  # block branches as (seq, expr, kind, simple, direct)

    def as_branch(self):
        return (self.seq, self.expr, self.kind, self.simple, self.direct)


def _edge_cedge(e, seq):
    expr = UNIT if e.label == UNIT_LABEL else Sym(e.label)
    return CEdge(
        e.src, e.dst, expr, "edge", True, True,
        frozenset(), frozenset([e.id]), e, seq,
    )


class _Contraction:
    def __init__(self, g, record=True):
        self.g = g
        self.edges = [_edge_cedge(e, i) for i, e in enumerate(g.edges)]
        self.seq = len(self.edges)
        self.records = [] if record else None

    # -- bookkeeping ---------------------------------------------------------

    def _adj(self):
        out, inn = {}, {}
        for c in self.edges:
            out.setdefault(c.src, []).append(c)
            inn.setdefault(c.dst, []).append(c)
        return out, inn

    def _next_seq(self):
        self.seq += 1
        return self.seq

    def _record(self, structure):
        if self.records is None:
            return -1
        self.records.append(structure)
        return len(self.records) - 1

    def _drop_record(self, idx):
        if self.records is not None and idx >= 0:
            self.records[idx] = None

    # -- contraction passes ---------------------------------------------------

    def merge_parallels(self):
        groups = {}
        for c in self.edges:
            groups.setdefault((c.src, c.dst), []).append(c)
        changed = False
        for (src, dst), group in groups.items():
            if len(group) < 2:
                continue
            changed = True
            group.sort(key=lambda c: c.seq)
            branches = []
            for c in group:
                if c.kind == "block" and c.branches:
                    # a block formed earlier between the same endpoints is an
                    # artifact of pass scheduling: fold its branches back in
                    self._drop_record(c.record_idx)
                    branches.extend(c.branches)
                else:
                    branches.append(c.as_branch())
            branches.sort(key=lambda b: b[0])
            simple = all(k == "edge" or s for _, _, k, s, _ in branches)
            direct = all(
                k == "edge" or (k == "chain" and d) for _, _, k, _, d in branches
            )
            if not simple:
                kind = "complex-block"
            elif direct:
                kind = "direct-simple-block"
            else:
                kind = "indirect-simple-block"
            vmem = frozenset().union(*[c.vmembers for c in group])
            emem = frozenset().union(*[c.emembers for c in group])
            expr = None
            if simple and all(e is not None for _, e, *_ in branches):
                expr = add(*[e for _, e, *_ in branches])
            idx = self._record(
                Structure(kind, src, dst, vmem | {src, dst}, emem)
            )
            sub = CEdge(
                src, dst, expr, "block", simple, direct,
                vmem, emem, None, min(c.seq for c in group), idx,
                tuple(branches),
            )
            self.edges = [c for c in self.edges if c not in group]
            self.edges.append(sub)
        return changed

    def collapse_chains(self):
        out, inn = self._adj()

        def is_link(v):
            return len(out.get(v, [])) == 1 and len(inn.get(v, [])) == 1

        visited = set()
        runs = []
        for c in sorted(self.edges, key=lambda c: c.seq):
            if id(c) in visited or not (is_link(c.src) or is_link(c.dst)):
                continue
            run = [c]
            while is_link(run[0].src):
                prev = inn[run[0].src][0]
                if id(prev) in visited or prev in run:
                    break
                run.insert(0, prev)
            while is_link(run[-1].dst):
                nxt = out[run[-1].dst][0]
                if id(nxt) in visited or nxt in run:
                    break
                run.append(nxt)
            if len(run) < 2:
                continue
            visited.update(id(x) for x in run)
            runs.append(run)
        for run in runs:
            segs = []
            for c in run:
                if c.kind == "chain":
                    self._drop_record(c.record_idx)  # superseded by longer run
                segs.append(c)
            src, dst = run[0].src, run[-1].dst
            interior = {c.src for c in run[1:]}
            vmem = frozenset(interior).union(*[c.vmembers for c in run])
            emem = frozenset().union(*[c.emembers for c in run])
            direct = all(c.kind == "edge" or (c.kind == "chain" and c.direct) for c in run)
            simple = all(c.kind == "edge" or c.simple for c in run)
            if direct:
                kind = "direct-simple-chain"
            elif simple:
                kind = "indirect-simple-chain"
            else:
                kind = "complex-chain"
            expr = None
            if all(c.expr is not None for c in run):
                expr = prod(*[c.expr for c in run])
            idx = self._record(Structure(kind, src, dst, vmem | {src, dst}, emem))
            sub = CEdge(
                src, dst, expr, "chain", simple, direct,
                vmem, emem, None, min(c.seq for c in run), idx,
            )
            self.edges = [c for c in self.edges if c not in run]
            self.edges.append(sub)
        return bool(runs)

    def run(self):
        changed = True
        while changed:
            changed = self.merge_parallels()
            changed = self.collapse_chains() or changed
        if self.records is not None:
            self.records = [r for r in self.records if r is not None]
        return self

    # -- complex-region handling ----------------------------------------------

    def _cgraph_paths(self, src, dst):
        """Path counts in the current contracted graph."""
        out, _ = self._adj()
        memo = {}

        def count(v):
            if v == dst:
                return 1
            if v in memo:
                return memo[v]
            memo[v] = sum(count(c.dst) for c in out.get(v, []))
            return memo[v]

        return count(src)

    def find_stuck_blocks(self):
        """Def-style blocks among the uncontracted remainder, innermost first.

        A candidate (a, b) region qualifies when its interior has no edges
        escaping the region and no single interior vertex carries every
        a-to-b path.
        """
        out, inn = self._adj()
        verts = set(out) | set(inn)
        below = {}
        above = {}
        for v in verts:
            seen = set()
            stack = [c.dst for c in out.get(v, [])]
            while stack:
                u = stack.pop()
                if u in seen:
                    continue
                seen.add(u)
                stack.extend(c.dst for c in out.get(u, []))
            below[v] = seen
        for v in verts:
            seen = set()
            stack = [c.src for c in inn.get(v, [])]
            while stack:
                u = stack.pop()
                if u in seen:
                    continue
                seen.add(u)
                stack.extend(c.src for c in inn.get(u, []))
            above[v] = seen
        candidates = []
        for a in sorted(verts):
            if len(out.get(a, [])) < 2:
                continue
            for b in sorted(below[a]):
                if len(inn.get(b, [])) < 2:
                    continue
                region = (below[a] & above[b]) | {a, b}
                interior = region - {a, b}
                if not interior:
                    continue
                ok = True
                for m in interior:
                    for c in out.get(m, []) + inn.get(m, []):
                        if c.src not in region or c.dst not in region:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    continue
                total = self._cgraph_paths(a, b)
                disjoint = True
                for m in interior:
                    if self._cgraph_paths(a, m) * self._cgraph_paths(m, b) == total:
                        disjoint = False  # every path shares m
                        break
                if disjoint:
                    candidates.append((len(region), a, b, frozenset(region)))
        candidates.sort()
        return candidates

    def substitute_stuck_block(self, a, b, region):
        group = [c for c in self.edges if c.src in region and c.dst in region]
        vmem = (region - {a, b}) | frozenset().union(*[c.vmembers for c in group])
        emem = frozenset().union(*[c.emembers for c in group])
        idx = self._record(Structure("complex-block", a, b, region | vmem, emem))
        sub = CEdge(a, b, None, "block", False, False, frozenset(vmem), emem,
                    None, self._next_seq(), idx)
        self.edges = [c for c in self.edges if c not in group]
        self.edges.append(sub)


def contract(g, record=True):
    """Contract to fixpoint; returns the contraction state."""
    return _Contraction(g, record=record).run()


def find_structures(g):
    """All maximal chains and blocks, innermost first, complex regions
    included.  Deterministic for a fixed input graph."""
    c = contract(g)
    while True:
        stuck = c.find_stuck_blocks()
        if not stuck:
            break
        _, a, b, region = stuck[0]
        c.substitute_stuck_block(a, b, region)
        c.run()
    return [r for r in c.records if r is not None]


def classify_block(g, src, sink):
    """Classification of the structure between a vertex pair.

    Returns the outermost structure recorded for the pair; a bare original
    edge with no other paths classifies as ``edge``.
    """
    structures = find_structures(g)
    found = [s for s in structures if s.src == src and s.sink == sink]
    if found:
        return found[-1]
    for e in g.edges:
        if e.src == src and e.dst == sink:
            if count_paths(g, src, sink) == 1:
                return Structure(
                    "edge", src, sink, frozenset([src, sink]), frozenset([e.id])
                )
    raise StructureError(f"no chain or block between {src} and {sink}")


def region_expr(g, src, sink):
    """Algebraic expression of the simple region between src and sink.

    Factor order follows the root-to-terminal direction.  Raises
    :class:`ComplexBlockError` when the region contains a complex block.
    """
    sub = subgraph_between(g, src, sink)
    if sub is None:
        raise StructureError(f"no paths from {src} to {sink}")
    c = contract(sub, record=False)
    if len(c.edges) == 1:
        return c.edges[0].expr
    raise ComplexBlockError(src, sink)


def segment_cross_level(g):
    """Insert unit-labeled filler chains so every edge spans adjacent levels.

    New vertices derive from the head (source) vertex of each cross-level
    edge; the original label rides on the final hop, so the unit hops cost
    nothing.
    """
    levels, cross = depth_levels(g)
    if not cross:
        return g
    existing = set(g.vertices)
    edges = []
    for e in g.edges:
        if e.id not in cross:
            edges.append(e)
            continue
        span = levels[e.dst] - levels[e.src]
        waypoints = []
        n = 1
        while len(waypoints) < span - 1:
            cand = f"{e.src}.{n}"
            n += 1
            if cand in existing:
                continue
            existing.add(cand)
            waypoints.append(cand)
        hops = [e.src] + waypoints + [e.dst]
        for k in range(span - 1):
            edges.append(Edge(f"{e.id}.{k + 1}", hops[k], hops[k + 1], UNIT_LABEL))
        edges.append(Edge(e.id, hops[-2], hops[-1], e.label))
    return DiffGraph(edges)
