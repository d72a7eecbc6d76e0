"""Chart engines over preprocessed CFGs.

``recognize_naive`` runs the three classic rules (Pred, Scan, Comp) by
unordered forward chaining.  ``recognize_fast`` runs the folded system
(Pred1/Pred2, Scan, Comp1/Comp2) under the position-major priority
discipline, optionally computing prefix weights (Start, Pred1lr, Pos) and
filtering predictions with one word of lookahead.
"""

from __future__ import annotations

import heapq
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import NeedsTables, NoParse, NonCommutative, TimeBudgetExceeded
from .grammar import Grammar
from .transform import ClosureTables, check_preprocessed, first_terminals, unary_heights

VIRTUAL = -1  # production id of the augmented start rule S'' -> S in the naive engine


@dataclass
class ParseResult:
    total: object
    prefix: Optional[list] = None
    best_tree: Optional[str] = None
    stats: Counter = field(default_factory=Counter)
    items: int = 0
    chart: Optional[dict] = None
    per_position: Optional[list] = None  # per-position rule tallies, where an engine records them

    @property
    def rule_counts(self) -> dict:
        return dict(self.stats)


def count_instantiations(result: ParseResult) -> dict:
    return dict(result.stats)


class CompiledGrammar:
    """Flat per-production arrays plus the static tables every engine needs."""

    def __init__(self, g: Grammar, validate: bool = True):
        if validate:
            check_preprocessed(g)
        sr = g.semiring
        self.grammar = g
        self.semiring = sr
        self.start = g.start
        self.nts = g.nonterminal_set
        self.lhs = [p.lhs for p in g.productions]
        self.rhs = [p.rhs for p in g.productions]
        self.weight = [sr.axiom(p.weight, pid) for pid, p in enumerate(g.productions)]
        self.by_lhs = {
            a: [pid for pid in pids if self.rhs[pid]] for a, pids in g.by_lhs.items()
        }
        self.height = unary_heights(g)
        self.first = first_terminals(g)
        self.nt_order = {a: i for i, a in enumerate(g.nonterminals)}  # fixed iteration order over sets
        self.start_null = sr.zero
        for pid in g.by_lhs.get(g.start, ()):
            if not self.rhs[pid]:
                self.start_null = self.weight[pid]


def compile_grammar(g: Grammar) -> CompiledGrammar:
    cached = getattr(g, "_compiled", None)
    if cached is None:
        cached = CompiledGrammar(g)
        g._compiled = cached
    return cached


class _Deadline:
    def __init__(self, deadline):
        self.deadline = deadline
        self.ticks = 0

    def tick(self):
        if self.deadline is None:
            return
        self.ticks += 1
        if self.ticks & 1023 == 0 and time.perf_counter() > self.deadline:
            raise TimeBudgetExceeded("parse exceeded its time budget")


# ---------------------------------------------------------------------------
# naive Earley


def recognize_naive(g: Grammar, x: Sequence[str], keep_chart: bool = False, deadline=None) -> ParseResult:
    cg = compile_grammar(g)
    sr = cg.semiring
    x = list(x)
    n = len(x)
    stats: Counter = Counter()
    if n == 0:
        return ParseResult(total=cg.start_null, stats=stats, items=0, chart={} if keep_chart else None)

    plus, times, one = sr.plus, sr.times, sr.one
    rhs_of = cg.rhs
    nts = cg.nts
    by_lhs = cg.by_lhs
    weight = cg.weight
    virtual_rhs = (cg.start,)

    def rhs(pid):
        return virtual_rhs if pid == VIRTUAL else rhs_of[pid]

    chart: dict = {}
    pending: dict = {}
    agenda: deque = deque()
    predicted: set = set()
    waiting: dict = {}  # (j, B) -> items [i, j, A -> mu . B nu]
    complete: dict = {}  # (j, B) -> items [j, k, B -> rho .]
    clock = _Deadline(deadline)

    def push(item, delta):
        if item in pending:
            pending[item] = plus(pending[item], delta)
        else:
            pending[item] = delta
            agenda.append(item)

    push((0, 0, VIRTUAL, 0), one)
    while agenda:
        clock.tick()
        item = agenda.popleft()
        delta = pending.pop(item)
        first = item not in chart
        chart[item] = plus(chart[item], delta) if not first else delta
        i, j, pid, dot = item
        r = rhs(pid)
        if dot < len(r):
            sym = r[dot]
            if sym in nts:
                if first:
                    waiting.setdefault((j, sym), []).append(item)
                    # Pred: the item is only a side condition; each production
                    # of sym is an instantiation, the consequent weight is the
                    # production weight alone.
                    for q in by_lhs.get(sym, ()):
                        stats["Pred"] += 1
                        cons = (j, j, q, 0)
                        if cons not in predicted:
                            predicted.add(cons)
                            push(cons, weight[q])
                for right in complete.get((j, sym), ()):
                    if first:
                        stats["Comp"] += 1
                    push((i, right[1], pid, dot + 1), times(delta, chart[right]))
            else:
                if j < n and x[j] == sym:
                    if first:
                        stats["Scan"] += 1
                    push((i, j + 1, pid, dot + 1), delta)
        else:
            if pid == VIRTUAL:
                continue
            b = cg.lhs[pid]
            if first:
                complete.setdefault((i, b), []).append(item)
            for left in waiting.get((i, b), ()):
                if first:
                    stats["Comp"] += 1
                li, _, lpid, ldot = left
                push((li, j, lpid, ldot + 1), times(chart[left], delta))

    total = chart.get((0, n, VIRTUAL, 1), sr.zero)
    return ParseResult(
        total=total,
        stats=stats,
        items=len(chart),
        chart=chart if keep_chart else None,
    )


# ---------------------------------------------------------------------------
# EarleyFast with priorities


class _Span:
    __slots__ = ("heap", "queued", "partial")

    def __init__(self):
        self.heap = []  # (height, B) for complete items over this span
        self.queued = set()
        self.partial = []  # (pid, dot) incomplete items with a nonempty prefix


def recognize_fast(
    g: Grammar,
    x: Sequence[str],
    prefix: bool = False,
    lookahead: bool = False,
    tables: Optional[ClosureTables] = None,
    keep_chart: bool = False,
    strict: bool = False,
    deadline=None,
) -> ParseResult:
    cg = compile_grammar(g)
    sr = cg.semiring
    if prefix:
        if tables is None or len(tables.suffix_product) != len(cg.rhs):
            raise NeedsTables("prefix weights need closure tables (free weights, left corners, suffix products)")
        if not sr.commutative or not sr.has_star:
            raise NonCommutative("prefix weights need a commutative closed semiring")
    x = list(x)
    n = len(x)
    stats: Counter = Counter()
    if n == 0:
        return ParseResult(total=cg.start_null, prefix=[] if prefix else None, stats=stats,
                           chart={} if keep_chart else None)
    return _FastRun(cg, x, prefix, lookahead, tables, keep_chart, strict, deadline).run()


class _FastRun:
    def __init__(self, cg, x, prefix, lookahead, tables, keep_chart, strict, deadline):
        self.cg = cg
        self.sr = cg.semiring
        self.x = x
        self.n = len(x)
        self.prefix = prefix
        self.lookahead = lookahead
        self.tables = tables
        self.keep_chart = keep_chart
        self.strict = strict
        self.clock = _Deadline(deadline)
        self.stats = Counter()

        self.inc = {}  # (i, j, pid, dot) -> beta, dot < |rhs|
        self.comp = {}  # (j, k, B) -> {pid: beta}
        self.cstar = {}  # (j, k, B) -> beta
        self.waiting = {}  # (j, C) -> [(i, pid, dot)]
        self.pred = [set() for _ in range(self.n + 1)]  # predicted nonterminals per position
        self.alpha = {}  # (i, B) -> prefix outside weight of [i, i, B -> . *]
        self.pos_alpha = [self.sr.zero] * (self.n + 1)
        self.comp1_alpha = {}
        self.spans = [dict() for _ in range(self.n + 1)]  # k -> {j: _Span}
        self.done = set() if strict else None

    # -- helpers -----------------------------------------------------------

    def span(self, j, k):
        s = self.spans[k].get(j)
        if s is None:
            s = self.spans[k][j] = _Span()
        return s

    def allowed(self, b, k):
        if not self.lookahead:
            return True
        return k < self.n and self.x[k] in self.cg.first.get(b, ())

    def add_complete(self, j, k, pid, beta):
        cg, sr = self.cg, self.sr
        b = cg.lhs[pid]
        key = (j, k, b)
        if self.strict and key in self.done:
            raise AssertionError(f"complete item {key} re-proved after it was popped")
        row = self.comp.get(key)
        if row is None:
            row = self.comp[key] = {}
        row[pid] = sr.plus(row[pid], beta) if pid in row else beta
        s = self.span(j, k)
        if b not in s.queued:
            s.queued.add(b)
            heapq.heappush(s.heap, (cg.height[b], b))

    def add_incomplete(self, i, k, pid, dot, beta):
        key = (i, k, pid, dot)
        if self.strict and key in self.done:
            raise AssertionError(f"item {key} re-proved after it was popped")
        old = self.inc.get(key)
        if old is None:
            self.inc[key] = beta
            self.span(i, k).partial.append((pid, dot))
        else:
            self.inc[key] = self.sr.plus(old, beta)

    def advance(self, i, k, pid, dot, beta):
        """Record the consequent ``[i, k, lhs -> rhs[:dot] . rhs[dot:]]``."""
        if dot == len(self.cg.rhs[pid]):
            self.add_complete(i, k, pid, beta)
        else:
            self.add_incomplete(i, k, pid, dot, beta)

    def scan(self, i, j, pid, dot, beta):
        if j < self.n and self.x[j] == self.cg.rhs[pid][dot]:
            self.stats["Scan"] += 1
            self.advance(i, j + 1, pid, dot + 1, beta)

    def predict(self, k, c):
        """Pred1 (no prefix weights): side-condition-only prediction of c at k."""
        if not self.allowed(c, k):
            return
        self.stats["Pred1"] += 1
        if c not in self.pred[k]:
            self.pred[k].add(c)
            self.agenda_k.append(("star", c))

    def predict_lr(self, j, k, pid, dot, beta):
        """Pred1lr: predict every left corner of the wanted nonterminal."""
        cg, sr, t = self.cg, self.sr, self.tables
        c = cg.rhs[pid][dot]
        outside = sr.times(sr.times(self.alpha[(j, cg.lhs[pid])], beta), t.suffix_product[pid][dot + 1])
        for b, lc in t.left_corner_full.get(c, {}).items():
            if not self.allowed(b, k):
                continue
            self.stats["Pred1lr"] += 1
            self.pred[k].add(b)
            key = (k, b)
            inc = sr.times(outside, lc)
            self.alpha[key] = sr.plus(self.alpha[key], inc) if key in self.alpha else inc

    def pos(self, j, k, pid, dot, beta):
        """Pos: a scanned word ends at k; add this item's share of the prefix weight."""
        cg, sr = self.cg, self.sr
        if cg.rhs[pid][dot - 1] in cg.nts:
            return
        self.stats["Pos"] += 1
        w = sr.times(sr.times(self.alpha[(j, cg.lhs[pid])], beta), self.tables.suffix_product[pid][dot])
        self.pos_alpha[k] = sr.plus(self.pos_alpha[k], w)

    # -- main loop -----------------------------------------------------------

    def run(self) -> ParseResult:
        cg, sr, n = self.cg, self.sr, self.n
        prefix = self.prefix
        if prefix:
            for b, w in self.tables.left_corner_full.get(cg.start, {}).items():
                if self.allowed(b, 0):
                    self.stats["Start"] += 1
                    self.pred[0].add(b)
                    self.alpha[(0, b)] = sr.plus(self.alpha[(0, b)], w) if (0, b) in self.alpha else w
        for k in range(n + 1):
            self.clock.tick()
            self.agenda_k = deque()
            if not prefix and k == 0:
                self.pred[0].add(cg.start)
                self.agenda_k.append(("star", cg.start))
            self.process_spans(k)
            self.process_predictions(k)
            if k < n and not self.spans[k + 1]:
                # nothing ends at k + 1, so no later item is provable
                break

        total = self.cstar.get((0, n, cg.start), sr.zero)
        items = (
            len(self.inc)
            + sum(len(r) for r in self.comp.values())
            + len(self.cstar)
            + sum(len(p) for p in self.pred)
        )
        result = ParseResult(total=total, stats=self.stats, items=items)
        if prefix:
            result.prefix = self.pos_alpha[1:]
            result.items += sum(1 for v in self.pos_alpha[1:] if not sr.is_zero(v))
        if self.keep_chart:
            chart = dict(self.inc)
            for (j, k, _b), row in self.comp.items():
                for pid, beta in row.items():
                    chart[(j, k, pid, len(cg.rhs[pid]))] = beta
            result.chart = chart
        return result

    def process_spans(self, k):
        cg, sr = self.cg, self.sr
        spans = self.spans[k]
        heap = [-j for j in spans if j < k]
        heapq.heapify(heap)
        seen = set(-h for h in heap)
        rhs = cg.rhs
        nts = cg.nts
        while heap:
            j = -heapq.heappop(heap)
            s = spans[j]
            # complete constituents first, in unary-height order
            while s.heap:
                self.clock.tick()
                _, b = heapq.heappop(s.heap)
                key = (j, k, b)
                row = self.comp[key]
                total = sr.zero
                for pid, beta in row.items():
                    self.stats["Comp1"] += 1
                    total = sr.plus(total, beta)
                    if self.prefix:
                        self.pos(j, k, pid, len(rhs[pid]), beta)
                        a = self.alpha[(j, b)]
                        self.comp1_alpha[key] = sr.plus(self.comp1_alpha[key], a) if key in self.comp1_alpha else a
                if self.strict:
                    self.done.add(key)
                self.cstar[key] = total
                # Comp2
                for i, pid, dot in self.waiting.get((j, b), ()):
                    self.stats["Comp2"] += 1
                    beta = sr.times(self.inc[(i, j, pid, dot)], total)
                    self.advance(i, k, pid, dot + 1, beta)
                    if i not in seen:
                        seen.add(i)
                        heapq.heappush(heap, -i)
            # then incomplete items with a nonempty prefix
            idx = 0
            while idx < len(s.partial):
                pid, dot = s.partial[idx]
                idx += 1
                key = (j, k, pid, dot)
                beta = self.inc[key]
                if self.strict:
                    self.done.add(key)
                sym = rhs[pid][dot]
                if sym in nts:
                    self.waiting.setdefault((k, sym), []).append((j, pid, dot))
                    if self.prefix:
                        self.predict_lr(j, k, pid, dot, beta)
                    else:
                        self.predict(k, sym)
                else:
                    self.scan(j, k, pid, dot, beta)
                if self.prefix:
                    self.pos(j, k, pid, dot, beta)

    def process_predictions(self, k):
        cg = self.cg
        rhs, nts, weight = cg.rhs, cg.nts, cg.weight
        if self.prefix:
            # predictions, then the rules they start; the predicted set at k is final here
            if k == self.n:
                return
            for b in sorted(self.pred[k], key=cg.nt_order.__getitem__):
                for pid in cg.by_lhs.get(b, ()):
                    self.stats["Pred2"] += 1
                    self.inc[(k, k, pid, 0)] = weight[pid]
                    sym = rhs[pid][0]
                    if sym in nts:
                        self.waiting.setdefault((k, sym), []).append((k, pid, 0))
                    else:
                        self.scan(k, k, pid, 0, weight[pid])
            return
        agenda = self.agenda_k
        while agenda:
            self.clock.tick()
            kind, payload = agenda.pop()
            if kind == "star":
                for pid in cg.by_lhs.get(payload, ()):
                    self.stats["Pred2"] += 1
                    self.inc[(k, k, pid, 0)] = weight[pid]
                    agenda.append(("rule", pid))
            else:
                pid = payload
                sym = rhs[pid][0]
                if sym in nts:
                    self.waiting.setdefault((k, sym), []).append((k, pid, 0))
                    self.predict(k, sym)
                else:
                    self.scan(k, k, pid, 0, weight[pid])


# ---------------------------------------------------------------------------
# Viterbi parses


def build_tree(g: Grammar, trace) -> str:
    """Bracketed tree from a pre-order list of production ids."""
    it = iter(trace)

    def node():
        pid = next(it)
        p = g.productions[pid]
        parts = []
        for s in p.rhs:
            parts.append(node() if s in g.nonterminal_set else s)
        return "(" + " ".join([p.lhs, *parts]) + ")"

    tree = node()
    rest = list(it)
    if rest:
        raise ValueError(f"trace has {len(rest)} unused production ids")
    return tree


def best_derivation(g: Grammar, x: Sequence[str], engine: str = "fast") -> ParseResult:
    sr = g.semiring
    if sr.name != "viterbi":
        raise ValueError("best_derivation needs the viterbi semiring")
    run = recognize_naive if engine == "earley" else recognize_fast
    result = run(g, x)
    if sr.is_zero(result.total):
        raise NoParse(f"no parse for {' '.join(x)!r}")
    result.best_tree = build_tree(g, result.total.trace)
    return result
