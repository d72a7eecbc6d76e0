"""Weighted context-free grammars: data model, text format, generating filter."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import BadWeight, GrammarSyntaxError, NoStart
from .semiring import Semiring

# Fresh symbols introduced by transforms contain this marker; user symbols
# may contain it too, collisions are avoided by `fresh_symbol`.
FRESH_MARK = "@"
RESERVED_PREFIX = "^"
EPSILON_LABEL = "<eps>"


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple
    weight: object

    @property
    def arity(self) -> int:
        return len(self.rhs)

    @property
    def size(self) -> int:
        return 1 + len(self.rhs)

    def __str__(self):
        return f"{self.lhs} -> {' '.join(self.rhs)}".rstrip()


class SizeReport(NamedTuple):
    size: int  # |G|, sum of 1 + |rhs|
    productions: int  # |R|
    max_arity: int  # K
    nonterminals: int
    terminals: int


class Grammar:
    """An immutable weighted CFG.

    A symbol is a nonterminal iff it is the left-hand side of some
    production.  Duplicate ``(lhs, rhs)`` pairs are merged by ``plus`` and
    zero-weight productions are dropped.  Production ids are indices into
    :attr:`productions` (first-occurrence order).
    """

    def __init__(self, productions: Iterable, start: str, semiring: Semiring):
        self.semiring = semiring
        self.start = start
        merged: dict = {}
        for p in productions:
            lhs, rhs, w = p.lhs, tuple(p.rhs), p.weight
            key = (lhs, rhs)
            if key in merged:
                merged[key] = semiring.plus(merged[key], w)
            else:
                merged[key] = w
        self.productions = [
            Production(lhs, rhs, w) for (lhs, rhs), w in merged.items() if not semiring.is_zero(w)
        ]
        self._index = {(p.lhs, p.rhs): i for i, p in enumerate(self.productions)}

        nts: dict = {}
        for p in self.productions:
            nts.setdefault(p.lhs, None)
        self.nonterminal_set = frozenset(nts)
        self.nonterminals = list(nts)
        terms: dict = {}
        for p in self.productions:
            for s in p.rhs:
                if s not in self.nonterminal_set:
                    terms.setdefault(s, None)
        self.terminals = list(terms)
        self.terminal_set = frozenset(terms)

        self.by_lhs: dict = {a: [] for a in self.nonterminals}
        for i, p in enumerate(self.productions):
            self.by_lhs[p.lhs].append(i)

    # -- queries -----------------------------------------------------------

    def is_nonterminal(self, sym) -> bool:
        return sym in self.nonterminal_set

    def lookup(self, lhs, rhs):
        """Production id of ``lhs -> rhs`` or None."""
        return self._index.get((lhs, tuple(rhs)))

    def weight_of(self, lhs, rhs):
        i = self.lookup(lhs, rhs)
        return self.semiring.zero if i is None else self.productions[i].weight

    def size_report(self) -> SizeReport:
        return SizeReport(
            size=sum(p.size for p in self.productions),
            productions=len(self.productions),
            max_arity=max((p.arity for p in self.productions), default=0),
            nonterminals=len(self.nonterminals),
            terminals=len(self.terminals),
        )

    @property
    def size(self) -> int:
        return sum(p.size for p in self.productions)

    def symbols(self) -> set:
        return set(self.nonterminal_set) | set(self.terminal_set) | {self.start}

    def with_productions(self, productions, start=None) -> "Grammar":
        return Grammar(productions, self.start if start is None else start, self.semiring)

    def __len__(self):
        return len(self.productions)

    def __iter__(self):
        return iter(self.productions)

    def __repr__(self):
        return f"<Grammar start={self.start} |R|={len(self.productions)} semiring={self.semiring.name}>"

    # -- serialization -------------------------------------------------------

    def to_text(self) -> str:
        fmt = self.semiring.format
        lines = [f"start: {self.start}"]
        for p in sorted(self.productions, key=lambda p: (p.lhs, p.rhs)):
            rhs = " ".join(p.rhs)
            lines.append(f"{fmt(p.weight)} {p.lhs} ->" + (f" {rhs}" if rhs else ""))
        return "\n".join(lines) + "\n"

    def same_as(self, other: "Grammar") -> bool:
        """Equality up to production order, with numeric tolerance on weights."""
        if self.start != other.start or len(self) != len(other):
            return False
        for p in self.productions:
            i = other.lookup(p.lhs, p.rhs)
            if i is None or not self.semiring.close(p.weight, other.productions[i].weight):
                return False
        return True


def parse_grammar(text: str, semiring: Semiring) -> Grammar:
    start = None
    prods = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("start:"):
            if start is not None:
                raise GrammarSyntaxError(lineno, "duplicate start header")
            name = line[len("start:"):].strip()
            if not name or len(name.split()) != 1:
                raise GrammarSyntaxError(lineno, "start header needs exactly one symbol")
            _check_symbol(name, lineno)
            start = name
            continue
        toks = line.split()
        if len(toks) < 3 or toks[2] != "->":
            raise GrammarSyntaxError(lineno, "expected '<weight> <lhs> -> <rhs...>'")
        try:
            w = semiring.parse(toks[0])
        except BadWeight as e:
            raise BadWeight(f"line {lineno}: {e}") from None
        if semiring.is_zero(w):
            raise BadWeight(f"line {lineno}: zero weight {toks[0]!r}")
        lhs = toks[1]
        rhs = tuple(toks[3:])
        for s in (lhs, *rhs):
            _check_symbol(s, lineno)
        prods.append(Production(lhs, rhs, w))
    if start is None:
        if not prods:
            raise NoStart("no start header and no productions")
        start = prods[0].lhs
    return Grammar(prods, start, semiring)


def _check_symbol(s, lineno):
    if s == "->":
        raise GrammarSyntaxError(lineno, "'->' used as a symbol")
    if s.startswith(RESERVED_PREFIX):
        raise GrammarSyntaxError(lineno, f"symbol {s!r} uses the reserved prefix {RESERVED_PREFIX!r}")
    if s == EPSILON_LABEL:
        raise GrammarSyntaxError(lineno, f"symbol {s!r} is reserved")


def load_grammar(path, semiring: Semiring) -> Grammar:
    with open(path, encoding="utf-8") as f:
        return parse_grammar(f.read(), semiring)


def grammar_size(g: Grammar) -> SizeReport:
    return g.size_report()


def generating_set(productions, nonterminals) -> set:
    """Nonterminals that derive some terminal string (fixed-point marking)."""
    prods = list(productions)
    marked: set = set()
    changed = True
    while changed:
        changed = False
        for p in prods:
            if p.lhs in marked:
                continue
            if all(s not in nonterminals or s in marked for s in p.rhs):
                marked.add(p.lhs)
                changed = True
    return marked


def restrict_to_generating(productions, start, semiring, nonterminals) -> Grammar:
    """Keep productions whose nonterminals (w.r.t. ``nonterminals``) all generate.

    ``nonterminals`` is passed explicitly so that symbols which lost all
    their productions in a transform are still recognized as nonterminals
    (and dropped) rather than reinterpreted as terminals.
    """
    prods = list(productions)
    gen = generating_set(prods, nonterminals)
    if start not in gen:
        return Grammar([], start, semiring)
    kept = [
        p for p in prods
        if p.lhs in gen and all(s not in nonterminals or s in gen for s in p.rhs)
    ]
    return Grammar(kept, start, semiring)


def filter_generating(g: Grammar) -> Grammar:
    return restrict_to_generating(g.productions, g.start, g.semiring, g.nonterminal_set)


def fresh_symbol(base: str, taken) -> str:
    """A name derived from ``base`` (``base@tag`` style) not present in ``taken``."""
    name = base
    while name in taken:
        name += FRESH_MARK
    return name
