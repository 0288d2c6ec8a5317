"""Noncommutative symbolic expressions over edge labels.

Expressions are built from atomic symbols (edge labels or reference-variable
names), the unit constant ``1``, ordered products, and sums.  Products never
commute: factor order follows the root-to-terminal direction of the graph the
expression came from.  An :class:`ExprSet` bundles shared reference
definitions (``s1 = ...``) with the Jacobian entries that use them.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    """Raised by the parser; carries the offending position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class CyclicReferenceError(ExprError):
    pass


class UnresolvedReferenceError(ExprError):
    pass


@dataclass(frozen=True)
class Expr:
    def __str__(self):
        return format_expr(self)


@dataclass(frozen=True)
class Sym(Expr):
    """An atomic symbol: an edge label or a reference-variable name."""

    name: str


@dataclass(frozen=True)
class _Unit(Expr):
    def __repr__(self):
        return "UNIT"


UNIT = _Unit()


@dataclass(frozen=True)
class Prod(Expr):
    factors: tuple = ()


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple = ()


def prod(*factors):
    """Ordered product; flattens nested products and drops unit factors."""
    flat = []
    for f in factors:
        if isinstance(f, Prod):
            flat.extend(f.factors)
        elif isinstance(f, _Unit):
            continue
        else:
            flat.append(f)
    if not flat:
        return UNIT
    if len(flat) == 1:
        return flat[0]
    return Prod(tuple(flat))


def add(*terms):
    """Sum; flattens nested sums.  Order of terms is preserved as given."""
    flat = []
    for t in terms:
        if isinstance(t, Sum):
            flat.extend(t.terms)
        else:
            flat.append(t)
    if not flat:
        raise ExprError("empty sum")
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def is_normal(e):
    if isinstance(e, (Sym, _Unit)):
        return True
    if isinstance(e, Prod):
        return len(e.factors) >= 2 and all(
            not isinstance(f, (Prod, _Unit)) and is_normal(f) for f in e.factors
        )
    if isinstance(e, Sum):
        return len(e.terms) >= 2 and all(
            not isinstance(t, Sum) and is_normal(t) for t in e.terms
        )
    return False


def normalize(e):
    """Flatten nested products/sums and strip unit factors."""
    if isinstance(e, (Sym, _Unit)):
        return e
    if isinstance(e, Prod):
        return prod(*[normalize(f) for f in e.factors])
    if isinstance(e, Sum):
        return add(*[normalize(t) for t in e.terms])
    raise ExprError(f"not an expression: {e!r}")


def canonical(e):
    """Normal form with sum terms sorted; products keep their order.

    Addition commutes, so two expressions that differ only in the order of
    sum terms denote the same value and the same multiplication count.
    """
    e = normalize(e)
    if isinstance(e, Prod):
        return Prod(tuple(canonical(f) for f in e.factors))
    if isinstance(e, Sum):
        terms = [canonical(t) for t in e.terms]
        return Sum(tuple(sorted(terms, key=format_expr)))
    return e


def equivalent_form(a, b):
    """Structural equality up to the order of sum terms."""
    return canonical(a) == canonical(b)


def free_symbols(e):
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, _Unit):
        return set()
    out = set()
    for sub in getattr(e, "factors", ()) + getattr(e, "terms", ()):
        out |= free_symbols(sub)
    return out


# ---------------------------------------------------------------------------
# formatting / parsing

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.']*")


def format_expr(e):
    if isinstance(e, _Unit):
        return "1"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Sum):
        return "+".join(format_expr(t) for t in e.terms)
    if isinstance(e, Prod):
        parts = []
        for f in e.factors:
            s = format_expr(f)
            if isinstance(f, Sum):
                s = f"({s})"
            parts.append(s)
        return "*".join(parts)
    raise ExprError(f"not an expression: {e!r}")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch):
        if self.peek() != ch:
            raise ExprSyntaxError(f"expected {ch!r}", self.pos)
        self.pos += 1

    def parse_sum(self):
        terms = [self.parse_product()]
        while self.peek() == "+":
            self.pos += 1
            terms.append(self.parse_product())
        return add(*terms)

    def parse_product(self):
        factors = [self.parse_atom()]
        while self.peek() == "*":
            self.pos += 1
            factors.append(self.parse_atom())
        return prod(*factors)

    def parse_atom(self):
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            inner = self.parse_sum()
            self.expect(")")
            return inner
        if ch == "1":
            nxt = self.text[self.pos + 1 : self.pos + 2]
            if not nxt or not (nxt.isalnum() or nxt in "_.'"):
                self.pos += 1
                return UNIT
        m = _NAME_RE.match(self.text, self.pos)
        if not m:
            raise ExprSyntaxError("expected symbol, '1' or '('", self.pos)
        self.pos = m.end()
        return Sym(m.group())


def parse_expr(text):
    """Parse ``*``/``+``/parenthesis syntax into a normalized expression."""
    p = _Parser(text)
    e = p.parse_sum()
    p.skip_ws()
    if p.pos != len(p.text):
        raise ExprSyntaxError("trailing input", p.pos)
    return e


# ---------------------------------------------------------------------------
# expression sets

_DEF_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_.']*)\s*=\s*(.*)$")
_ENTRY_LINE = re.compile(r"^\s*J\[\s*([^,\]]+?)\s*,\s*([^,\]]+?)\s*\]\s*=\s*(.*)$")


@dataclass
class ExprSet:
    """Ordered reference definitions plus (root, terminal) Jacobian entries.

    A :class:`Sym` whose name matches a definition acts as a reference to it;
    definitions must be acyclic and are each counted once by the cost model.
    """

    defs: list = field(default_factory=list)  # [(name, Expr)]
    entries: list = field(default_factory=list)  # [((root, terminal), Expr)]

    @property
    def def_map(self):
        return dict(self.defs)

    def define(self, name, expr):
        if name in self.def_map:
            raise ExprError(f"duplicate definition for {name}")
        self.defs.append((name, normalize(expr)))

    def add_entry(self, root, terminal, expr):
        self.entries.append(((root, terminal), normalize(expr)))

    def entry_map(self):
        out = {}
        for pair, e in self.entries:
            out[pair] = add(out[pair], e) if pair in out else e
        return out

    def all_exprs(self):
        for name, e in self.defs:
            yield name, e
        for pair, e in self.entries:
            yield pair, e


def parse_exprset(text):
    s = ExprSet()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _ENTRY_LINE.match(line)
        if m:
            s.add_entry(m.group(1), m.group(2), parse_expr(m.group(3)))
            continue
        m = _DEF_LINE.match(line)
        if m:
            try:
                s.define(m.group(1), parse_expr(m.group(2)))
            except ExprSyntaxError as exc:
                raise ExprSyntaxError(f"line {lineno}: {exc}", exc.position)
            continue
        raise ExprError(f"line {lineno}: expected 'name = expr' or 'J[r,t] = expr'")
    return s


def format_exprset(s):
    lines = [f"{name} = {format_expr(e)}" for name, e in s.defs]
    lines += [f"J[{r},{t}] = {format_expr(e)}" for (r, t), e in s.entries]
    return "\n".join(lines) + ("\n" if lines else "")


def expand_expr(e, def_map, _stack=()):
    """Substitute reference definitions into an expression."""
    if isinstance(e, Sym):
        if e.name in def_map:
            if e.name in _stack:
                cycle = " -> ".join(_stack + (e.name,))
                raise CyclicReferenceError(f"cyclic reference: {cycle}")
            return expand_expr(def_map[e.name], def_map, _stack + (e.name,))
        return e
    if isinstance(e, _Unit):
        return e
    if isinstance(e, Prod):
        return prod(*[expand_expr(f, def_map, _stack) for f in e.factors])
    if isinstance(e, Sum):
        return add(*[expand_expr(t, def_map, _stack) for t in e.terms])
    raise ExprError(f"not an expression: {e!r}")


def expand_refs(s):
    """Expression set with every reference substituted away.

    The value of every entry is preserved; the multiplication count may grow
    because sharing is lost.
    """
    dm = s.def_map
    out = ExprSet()
    for pair, e in s.entries:
        out.entries.append((pair, expand_expr(e, dm)))
    return out


def _expr_cost(e):
    if isinstance(e, (Sym, _Unit)):
        return 0
    if isinstance(e, Prod):
        return (len(e.factors) - 1) + sum(_expr_cost(f) for f in e.factors)
    if isinstance(e, Sum):
        return sum(_expr_cost(t) for t in e.terms)
    raise ExprError(f"not an expression: {e!r}")


def fma_cost(s):
    """Total multiplication count; additions are fused and cost nothing.

    Accepts a single expression or an :class:`ExprSet`.  Each reference
    definition is counted once no matter how often it is used.  Unit factors
    are stripped during normalization, so multiplying by ``1`` is free.
    """
    if isinstance(s, Expr):
        return _expr_cost(normalize(s))
    dm = s.def_map
    for pair, e in s.entries:
        expand_expr(e, dm)  # raises on cyclic or malformed references
    total = 0
    for name, e in s.defs:
        total += _expr_cost(normalize(e))
    for pair, e in s.entries:
        total += _expr_cost(normalize(e))
    return total


def symbol_occurrences(e, counts=None):
    """Occurrence count per symbol (a symbol used twice counts twice)."""
    counts = {} if counts is None else counts
    if isinstance(e, Sym):
        counts[e.name] = counts.get(e.name, 0) + 1
    if isinstance(e, (Prod, Sum)):
        for sub in getattr(e, "factors", ()) + getattr(e, "terms", ()):
            symbol_occurrences(sub, counts)
    return counts


def inline_single_use(s):
    """Drop definitions used at most once by substituting them in place.

    Shared structure stays named; one-shot names disappear, which keeps the
    set minimal without changing its value or multiplication count.  Names
    are never renumbered, so gaps in the s-numbering are expected.
    """
    while True:
        counts = {name: 0 for name, _ in s.defs}
        for _, e in s.all_exprs():
            for name, k in symbol_occurrences(e).items():
                if name in counts:
                    counts[name] += k
        victims = {n for n, k in counts.items() if k <= 1}
        if not victims:
            return s
        dm = {n: d for n, d in s.defs if n in victims}
        out = ExprSet()
        for name, e in s.defs:
            if name not in victims:
                out.define(name, expand_expr(e, dm))
        for (r, t), e in s.entries:
            out.add_entry(r, t, expand_expr(e, dm))
        s = out


def base_symbols(s):
    """Symbols that are not reference names (the instantiable labels)."""
    if isinstance(s, Expr):
        return free_symbols(s)
    dm = s.def_map
    out = set()
    for _, e in s.all_exprs():
        out |= free_symbols(e)
    return out - set(dm)
