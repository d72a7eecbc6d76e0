"""Chart engines over a single WFSA grammar.

Items are ``[i, k, q]`` (a state reached after consuming ``x[i:k]``), the
provisional ``[i, k, q?]`` that only ``Filter`` may promote, predictions
``[k, k, B -> . *]`` and completions ``[j, k, B -> * .]``.  The schedule is
position-major like :func:`earleykit.earley.recognize_fast`: spans ending at
``k`` are finished in decreasing start order, and inside a span nodes pop in
a static topological order of the epsilon / completion dependencies.

The diagonal span ``(k, k)`` only ever holds states reachable from an
initial state by epsilon arcs, so it is solved as a small fixpoint: a state
is live when it can end in a predicted nonterminal, and live states add
their own predictions.  Every predecessor of a live state is live, so the
weight of ``[k, k, q]`` is the static initial-closure weight of ``q``.
"""

from __future__ import annotations

import heapq
from collections import Counter
from typing import NamedTuple, Optional, Sequence

from .earley import ParseResult, _Deadline
from .wfsa import SideTables, Wfsa, build_side_tables, is_hat, unhat


class _FsaSpan:
    __slots__ = ("heap", "prov", "complete")

    def __init__(self):
        self.heap = []  # (rank, node)
        self.prov = {}  # q -> beta of [i, k, q?]
        self.complete = {}  # B -> beta of [i, k, B -> * .]


def _tables(m: Wfsa, tables: Optional[SideTables]) -> SideTables:
    if tables is not None:
        return tables
    cached = getattr(m, "_side_tables", None)
    if cached is None:
        cached = build_side_tables(m)
        m._side_tables = cached
    return cached


def recognize_fsa(m: Wfsa, x: Sequence[str], tables: Optional[SideTables] = None,
                  keep_chart: bool = False, strict: bool = False, deadline=None) -> ParseResult:
    return _FsaRun(m, _tables(m, tables), x, False, keep_chart, strict, deadline).run()


def recognize_fsa_binarized(m: Wfsa, x: Sequence[str], tables: Optional[SideTables] = None,
                            keep_chart: bool = False, strict: bool = False, deadline=None) -> ParseResult:
    return _FsaRun(m, _tables(m, tables), x, True, keep_chart, strict, deadline).run()


class _FsaRun:
    def __init__(self, m, t, x, binarized, keep_chart, strict, deadline):
        self.m = m
        self.t = t
        self.sr = m.semiring
        self.x = list(x)
        self.n = len(self.x)
        self.binarized = binarized
        self.strict = strict
        self.clock = _Deadline(deadline)
        self.stats = Counter()
        self.chart = {} if keep_chart else None
        self.items = 0
        n = self.n
        self.pred = [set() for _ in range(n + 1)]
        self.spans = [dict() for _ in range(n + 1)]  # k -> {i: _FsaSpan}
        # (j, B) -> [(i, q', beta (x) w)] for Comp2, or {(i, q'): weight} for Comp2a
        self.waiting = {}
        self.done = set()
        self.per_position = [Counter() for _ in range(n + 1)]
        self.hat_arcs = {}
        if not binarized:
            fc = t.final_closure
            for a in m.arcs:
                if is_hat(a.label) and a.dst in fc:
                    self.hat_arcs.setdefault(a.src, []).append((unhat(a.label), a.weight, fc[a.dst]))

    # -- item construction ---------------------------------------------------

    def _span(self, i, k):
        sp = self.spans[k].get(i)
        if sp is None:
            sp = self.spans[k][i] = _FsaSpan()
        return sp

    def add_prov(self, i, k, q, w):
        if self.strict and ("q", i, k, q) in self.done:
            raise AssertionError(f"late contribution to [{i},{k},{q}?]")
        sp = self._span(i, k)
        if q in sp.prov:
            sp.prov[q] = self.sr.plus(sp.prov[q], w)
        else:
            sp.prov[q] = w
            self.items += 1
            heapq.heappush(sp.heap, (self.t.rank[q], 0, q))

    def add_complete(self, i, k, b, w):
        if self.strict and ("B", i, k, b) in self.done:
            raise AssertionError(f"late contribution to [{i},{k},{b} -> * .]")
        sp = self._span(i, k)
        if b in sp.complete:
            sp.complete[b] = self.sr.plus(sp.complete[b], w)
        else:
            sp.complete[b] = w
            self.items += 1
            heapq.heappush(sp.heap, (self.t.rank[("nt", b)], 1, b))

    def finalize(self, i, k, q, beta, diagonal=False):
        """Consequences of a state item [i, k, q] that passed Filter."""
        sr, t, stats = self.sr, self.t, self.stats
        self.items += 1
        if self.chart is not None:
            self.chart[("state", i, k, q)] = beta
        for b in t.can_advance.get(q, ()):
            stats["Pred1"] += 1
            if b not in self.pred[k]:
                self.pred[k].add(b)
                self.items += 1
        for b, q2, w in t.out_nt.get(q, ()):
            entry = self.waiting.setdefault((k, b), {} if self.binarized else [])
            val = sr.times(beta, w)
            if self.binarized:
                stats["Comp2a"] += 1
                key = (i, q2)
                if key in entry:
                    entry[key] = sr.plus(entry[key], val)
                else:
                    entry[key] = val
                    self.items += 1
            else:
                entry.append((i, q2, val))
        if not diagonal:
            if self.binarized:
                for b, w in t.hat_final.get(q, ()):
                    stats["Comp1b"] += 1
                    self.add_complete(i, k, b, sr.times(beta, w))
            else:
                for b, w, fw in self.hat_arcs.get(q, ()):
                    stats["Comp1"] += 1
                    self.add_complete(i, k, b, sr.times(sr.times(beta, w), fw))
            for q2, w in t.out_eps.get(q, ()):
                stats["Epsilon"] += 1
                self.add_prov(i, k, q2, sr.times(beta, w))
        if k < self.n:
            arcs = t.out_term.get((q, self.x[k]))
            if arcs:
                if self.binarized:
                    # [i, k+1, q -a-> *]; only q with an a-arc can use it
                    stats["Scan1"] += 1
                    self.items += 1
                    rule = "Scan2"
                else:
                    rule = "Scan"
                for q2, w in arcs:
                    stats[rule] += 1
                    self.per_position[k + 1][rule] += 1
                    self.add_prov(i, k + 1, q2, sr.times(beta, w))

    # -- schedule -------------------------------------------------------------

    def run(self) -> ParseResult:
        sr, t, m = self.sr, self.t, self.m
        n = self.n
        start = m.start
        if n == 0:
            total = sr.zero
            for q, s in t.init_closure.items():
                for b, w in t.hat_final.get(q, ()):
                    if b == start:
                        total = sr.plus(total, sr.times(s, w))
            return ParseResult(total=total, stats=self.stats, items=0,
                               chart=self.chart, per_position=self.per_position)
        self.pred[0].add(start)
        self.items += 1
        for k in range(n + 1):
            if k > 0:
                self.process_spans(k)
            if k < n:
                self.process_diagonal(k)
                if not self.spans[k + 1]:
                    break
        total = sr.zero
        top = self.spans[n].get(0)
        if top is not None:
            total = top.complete.get(start, sr.zero)
        return ParseResult(total=total, stats=self.stats, items=self.items,
                           chart=self.chart, per_position=self.per_position)

    def process_spans(self, k):
        sr, t, stats = self.sr, self.t, self.stats
        spans = self.spans[k]
        while True:
            pending = [i for i in spans if i < k and spans[i].heap]
            if not pending:
                break
            i = max(pending)
            sp = spans[i]
            while sp.heap:
                self.clock.tick()
                _, kind, node = heapq.heappop(sp.heap)
                if kind == 0:
                    beta = sp.prov[node]
                    if self.strict:
                        self.done.add(("q", i, k, node))
                    if self.chart is not None:
                        self.chart[("prov", i, k, node)] = beta
                    ends = t.can_end_in.get(node)
                    if ends and not ends.isdisjoint(self.pred[i]):
                        stats["Filter"] += 1
                        self.finalize(i, k, node, beta)
                else:
                    beta = sp.complete[node]
                    if self.strict:
                        self.done.add(("B", i, k, node))
                    if self.chart is not None:
                        self.chart[("complete", i, k, node)] = beta
                    entry = self.waiting.get((i, node))
                    if not entry:
                        continue
                    if self.binarized:
                        for (h, q2), w in entry.items():
                            stats["Comp2b"] += 1
                            self.add_prov(h, k, q2, sr.times(w, beta))
                    else:
                        for h, q2, w in entry:
                            stats["Comp2"] += 1
                            self.add_prov(h, k, q2, sr.times(w, beta))

    def process_diagonal(self, k):
        t, stats = self.t, self.stats
        pred = self.pred[k]
        if not pred:
            return
        # Pred2 seeds every initial state; Epsilon and Filter close over the
        # initial epsilon-closure until no new prediction makes a state live.
        stats["Pred2"] += len(self.m.initial)
        candidates = sorted(t.init_closure, key=t.rank.__getitem__)
        live = []
        live_set = set()
        changed = True
        while changed:
            changed = False
            for q in candidates:
                if q in live_set:
                    continue
                ends = t.can_end_in.get(q)
                if ends and not ends.isdisjoint(pred):
                    live_set.add(q)
                    live.append(q)
                    pred.update(t.can_advance.get(q, ()))
                    changed = True
        prov = set(self.m.initial)
        for q in live:
            for q2, _ in t.out_eps.get(q, ()):
                stats["Epsilon"] += 1
                prov.add(q2)
        self.items += len(prov)
        stats["Filter"] += len(live)
        live.sort(key=t.rank.__getitem__)
        for q in live:
            self.finalize(k, k, q, t.init_closure[q], diagonal=True)


class BoundReport(NamedTuple):
    states: int  # |Q|
    c: int  # max out-arcs of one state sharing a terminal label
    nonterminal_arcs: int  # |E_N|
    bound: int  # |Q| * c + |E_N|
    scan_per_position: list  # scan-rule firings landing at each position 1..N
    max_scan: int

    def within_scan_bound(self) -> bool:
        return self.max_scan <= self.states * self.c


def fsa_runtime_bound_report(result: ParseResult, m: Wfsa, tables: Optional[SideTables] = None) -> BoundReport:
    t = _tables(m, tables)
    per = result.per_position or []
    scans = [sum(c[r] for r in ("Scan", "Scan2")) for c in per[1:]]
    c = t.terminal_out_degree
    return BoundReport(
        states=m.num_states,
        c=c,
        nonterminal_arcs=t.nonterminal_arcs,
        bound=m.num_states * c + t.nonterminal_arcs,
        scan_per_position=scans,
        max_scan=max(scans, default=0),
    )
