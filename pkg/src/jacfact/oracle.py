"""Ground-truth evaluation and randomized equivalence checking.

Bauer's multi-path chain rule is evaluated by brute force: a Jacobian entry
is the sum over every root-to-terminal path of the product of its edge
labels.  Checks run in the prime field GF(2^61 - 1) by default, where
equality is exact and a random instantiation exposes any fixed polynomial
discrepancy with overwhelming probability.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import expr as ex
from .expr import ExprSet, Prod, Sum, Sym, _Unit
from .graph import DEFAULT_PATH_GUARD, DiffGraph, UNIT_LABEL, enumerate_paths

PRIME = 2**61 - 1


class OracleError(ValueError):
    pass


class SupportMismatch(OracleError):
    pass


@dataclass
class Instantiation:
    values: dict
    seed: int
    mode: str = "field"

    def __getitem__(self, label):
        if label == UNIT_LABEL:
            return 1 if self.mode == "field" else 1.0
        try:
            return self.values[label]
        except KeyError:
            raise OracleError(f"label {label} not instantiated") from None


def instantiate(labels, seed, mode="field"):
    """Deterministic nonzero assignment for every non-unit label.

    Field values are drawn uniformly from [2, p-2]: zero would mask dropped
    factors and one would mask dropped unit handling.
    """
    rng = random.Random(seed)
    values = {}
    for label in sorted(set(labels) - {UNIT_LABEL}):
        if mode == "field":
            values[label] = rng.randrange(2, PRIME - 1)
        else:
            values[label] = rng.uniform(0.5, 2.0)
    return Instantiation(values, seed, mode)


def eval_expr(e, inst, def_values=None):
    def_values = def_values or {}
    p = PRIME if inst.mode == "field" else None

    def ev(node):
        if isinstance(node, _Unit):
            return 1 if p else 1.0
        if isinstance(node, Sym):
            if node.name in def_values:
                return def_values[node.name]
            return inst[node.name]
        if isinstance(node, Prod):
            out = 1 if p else 1.0
            for f in node.factors:
                out = out * ev(f) % p if p else out * ev(f)
            return out
        if isinstance(node, Sum):
            out = 0 if p else 0.0
            for t in node.terms:
                out = (out + ev(t)) % p if p else out + ev(t)
            return out
        raise OracleError(f"not an expression: {node!r}")

    return ev(e)


def eval_exprset(s, inst):
    """Map (root, terminal) -> value, with each definition evaluated once."""
    def_values = {}
    for name, e in s.defs:
        ex.expand_expr(e, s.def_map)  # cycle check
        def_values[name] = eval_expr(e, inst, def_values)
    out = {}
    p = PRIME if inst.mode == "field" else None
    for pair, e in s.entries:
        v = eval_expr(e, inst, def_values)
        if pair in out:
            out[pair] = (out[pair] + v) % p if p else out[pair] + v
        else:
            out[pair] = v
    return out


def bauer_eval(g, inst, guard=DEFAULT_PATH_GUARD):
    """Jacobian entries by exhaustive path enumeration, exact in the field."""
    p = PRIME if inst.mode == "field" else None
    out = {}
    for y in g.roots:
        for x in g.terminals:
            total = 0 if p else 0.0
            paths = enumerate_paths(g, y, x, guard=guard)
            if not paths:
                continue
            for path in paths:
                term = 1 if p else 1.0
                for eid in path:
                    term = term * inst[g.edge(eid).label] % p if p else term * inst[g.edge(eid).label]
                total = (total + term) % p if p else total + term
            out[(y, x)] = total
    return out


# ---------------------------------------------------------------------------
# equivalence checking


def labels_of(artifact):
    if isinstance(artifact, DiffGraph):
        return {e.label for e in artifact.edges if e.label != UNIT_LABEL}
    if isinstance(artifact, ExprSet):
        return ex.base_symbols(artifact)
    if isinstance(artifact, dict):
        labels = set()
        for e in artifact.values():
            labels |= ex.free_symbols(e)
        return labels
    raise OracleError(f"cannot evaluate {type(artifact).__name__}")


def eval_artifact(artifact, inst):
    if isinstance(artifact, DiffGraph):
        return bauer_eval(artifact, inst)
    if isinstance(artifact, ExprSet):
        return eval_exprset(artifact, inst)
    if isinstance(artifact, dict):  # (root, terminal) -> Expr
        return {pair: eval_expr(e, inst) for pair, e in artifact.items()}
    raise OracleError(f"cannot evaluate {type(artifact).__name__}")


def support_of(artifact, inst):
    return set(eval_artifact(artifact, inst))


@dataclass
class EquivReport:
    trials: int
    mode: str
    mismatches: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches

    def to_json(self):
        return {
            "trials": self.trials,
            "mode": self.mode,
            "mismatches": [
                {"pair": list(pair), "seed": seed, "lhs": str(a), "rhs": str(b)}
                for pair, seed, a, b in self.mismatches
            ],
        }


def check_equiv(a, b, trials=100, seed=0, mode="field", rtol=1e-9):
    """Randomized equivalence of two evaluatable artifacts.

    Supports must match exactly.  Field mode compares exactly; float mode
    uses the given relative tolerance.  The report carries every mismatching
    (pair, seed) so a failure is reproducible.
    """
    labels = labels_of(a) | labels_of(b)
    report = EquivReport(trials, mode)
    for t in range(trials):
        inst = instantiate(labels, seed + t, mode)
        va = eval_artifact(a, inst)
        vb = eval_artifact(b, inst)
        if set(va) != set(vb):
            missing = set(va) ^ set(vb)
            raise SupportMismatch(f"entry supports differ on {sorted(missing)}")
        for pair in sorted(va):
            x, y = va[pair], vb[pair]
            if mode == "field":
                equal = x == y
            else:
                equal = abs(x - y) <= rtol * max(1.0, abs(x), abs(y))
            if not equal:
                report.mismatches.append((pair, seed + t, x, y))
    return report
