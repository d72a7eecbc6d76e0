"""Brute-force references for the chart engines.

Nothing here is fast.  ``enumerate_derivations`` lists every tree of a
sentence, ``derivation_sum`` sums the same trees without listing them,
``inside_all_strings`` sums derivations of every short string at once (by
fixed-point iteration, so epsilon and unary cycles are fine), and
``rewrites_check`` answers ``mu =>* x`` with a boolean chart.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InfiniteDerivations
from .grammar import Grammar

MAX_ENUMERATED_TREES = 20_000
INSIDE_TOL = 1e-15
INSIDE_MAX_ITERS = 100_000


class DerivationTree(NamedTuple):
    label: str
    pid: int
    children: tuple  # DerivationTree or terminal string

    def to_bracketed(self) -> str:
        parts = [c if isinstance(c, str) else c.to_bracketed() for c in self.children]
        return "(" + " ".join([self.label, *parts]) + ")"

    def yield_(self) -> tuple:
        out = []
        for c in self.children:
            out.extend((c,) if isinstance(c, str) else c.yield_())
        return tuple(out)

    def productions(self) -> list:
        """Production ids in pre-order."""
        out = [self.pid]
        for c in self.children:
            if not isinstance(c, str):
                out.extend(c.productions())
        return out

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children if not isinstance(c, str)), default=0)


def tree_weight(g: Grammar, tree: DerivationTree):
    """Product of production weights in pre-order."""
    sr = g.semiring
    w = sr.one
    for pid in tree.productions():
        w = sr.times(w, sr.axiom(g.productions[pid].weight, pid))
    return w


def derivable_chart(g: Grammar, x: Sequence[str]) -> set:
    """All ``(A, i, j)`` with ``A =>* x[i:j]`` (least fixed point, handles every cycle)."""
    x = list(x)
    n = len(x)
    nts = g.nonterminal_set
    chart: set = set()

    def seq_spans(rhs, i):
        """End positions reachable by deriving ``rhs`` from position ``i``."""
        ends = {i}
        for s in rhs:
            nxt = set()
            for m in ends:
                if s in nts:
                    nxt.update(j for j in range(m, n + 1) if (s, m, j) in chart)
                elif m < n and x[m] == s:
                    nxt.add(m + 1)
            ends = nxt
            if not ends:
                break
        return ends

    changed = True
    while changed:
        changed = False
        for p in g.productions:
            for i in range(n + 1):
                for j in seq_spans(p.rhs, i):
                    if (p.lhs, i, j) not in chart:
                        chart.add((p.lhs, i, j))
                        changed = True
    return chart


def rewrites_check(g: Grammar, mu: Sequence[str], x: Sequence[str]) -> bool:
    """True iff the symbol sequence ``mu`` rewrites to the terminal string ``x``."""
    x = list(x)
    n = len(x)
    chart = derivable_chart(g, x)
    nts = g.nonterminal_set
    ends = {0}
    for s in mu:
        nxt = set()
        for m in ends:
            if s in nts:
                nxt.update(j for j in range(m, n + 1) if (s, m, j) in chart)
            elif m < n and x[m] == s:
                nxt.add(m + 1)
        ends = nxt
    return n in ends


class _Enumerator:
    """Memoized recursion over ``(A, i, j)`` restricted to derivable spans.

    Because every visited subgoal can be completed, re-entering a subgoal
    that is still on the stack means there are infinitely many trees.
    """

    def __init__(self, g: Grammar, x, reverse=False):
        self.g = g
        self.sr = g.semiring
        self.x = list(x)
        self.n = len(self.x)
        self.chart = derivable_chart(g, x)
        self.reverse = reverse
        self.stack: set = set()
        self.weights = [self.sr.axiom(p.weight, pid) for pid, p in enumerate(g.productions)]

    def ok(self, sym, i, j):
        if sym in self.g.nonterminal_set:
            return (sym, i, j) in self.chart
        return j == i + 1 and self.x[i] == sym

    def seq_ok(self, rhs, pos, i, j):
        ends = {i}
        for s in rhs[pos:]:
            ends = {e for m in ends for e in range(m, j + 1) if self.ok(s, m, e)}
            if not ends:
                return False
        return j in ends

    def pids(self, a):
        pids = self.g.by_lhs.get(a, [])
        return list(reversed(pids)) if self.reverse else pids

    def splits(self, i, j):
        r = range(i, j + 1)
        return reversed(r) if self.reverse else r

    def guard(self, key):
        if key in self.stack:
            raise InfiniteDerivations(f"infinitely many derivations of {key[0]} over span {key[1]}:{key[2]}")
        self.stack.add(key)


class _TreeEnumerator(_Enumerator):
    def __init__(self, g, x, reverse=False):
        super().__init__(g, x, reverse)
        self.memo: dict = {}
        self.seq_memo: dict = {}

    def derive(self, a, i, j) -> list:
        key = (a, i, j)
        if key in self.memo:
            return self.memo[key]
        self.guard(key)
        out = []
        for pid in self.pids(a):
            rhs = self.g.productions[pid].rhs
            if not self.seq_ok(rhs, 0, i, j):
                continue
            for kids, w in self.seq(pid, 0, i, j):
                out.append((DerivationTree(a, pid, kids), self.sr.times(self.weights[pid], w)))
        self.stack.discard(key)
        self.memo[key] = out
        return out

    def seq(self, pid, pos, i, j) -> list:
        key = (pid, pos, i, j)
        if key in self.seq_memo:
            return self.seq_memo[key]
        rhs = self.g.productions[pid].rhs
        sr = self.sr
        if pos == len(rhs):
            out = [((), sr.one)] if i == j else []
        else:
            out = []
            sym = rhs[pos]
            for m in self.splits(i, j):
                if not self.ok(sym, i, m) or not self.seq_ok(rhs, pos + 1, m, j):
                    continue
                heads = [(sym, sr.one)] if sym not in self.g.nonterminal_set else self.derive(sym, i, m)
                rests = self.seq(pid, pos + 1, m, j)
                for (t, w1), (rest, w2) in itertools.product(heads, rests):
                    out.append(((t,) + rest, sr.times(w1, w2)))
        self.seq_memo[key] = out
        return out


class _SumEnumerator(_Enumerator):
    def __init__(self, g, x, reverse=False, counting=False):
        super().__init__(g, x, reverse)
        self.memo: dict = {}
        self.seq_memo: dict = {}
        self.counting = counting

    def _plus(self, a, b):
        return a + b if self.counting else self.sr.plus(a, b)

    def _times(self, a, b):
        return a * b if self.counting else self.sr.times(a, b)

    def _zero(self):
        return 0 if self.counting else self.sr.zero

    def _one(self):
        return 1 if self.counting else self.sr.one

    def derive(self, a, i, j):
        key = (a, i, j)
        if key in self.memo:
            return self.memo[key]
        self.guard(key)
        total = self._zero()
        for pid in self.pids(a):
            rhs = self.g.productions[pid].rhs
            if not self.seq_ok(rhs, 0, i, j):
                continue
            w = 1 if self.counting else self.weights[pid]
            total = self._plus(total, self._times(w, self.seq(pid, 0, i, j)))
        self.stack.discard(key)
        self.memo[key] = total
        return total

    def seq(self, pid, pos, i, j):
        key = (pid, pos, i, j)
        if key in self.seq_memo:
            return self.seq_memo[key]
        rhs = self.g.productions[pid].rhs
        if pos == len(rhs):
            out = self._one() if i == j else self._zero()
        else:
            out = self._zero()
            sym = rhs[pos]
            for m in self.splits(i, j):
                if not self.ok(sym, i, m) or not self.seq_ok(rhs, pos + 1, m, j):
                    continue
                head = self._one() if sym not in self.g.nonterminal_set else self.derive(sym, i, m)
                out = self._plus(out, self._times(head, self.seq(pid, pos + 1, m, j)))
        self.seq_memo[key] = out
        return out


def enumerate_derivations(g: Grammar, x: Sequence[str], reverse: bool = False) -> list:
    """Every derivation tree of ``x`` from the start symbol, with its weight.

    Raises InfiniteDerivations when ``x`` has infinitely many trees
    (a derivable unary or epsilon cycle).
    """
    e = _TreeEnumerator(g, x, reverse)
    if not e.ok(g.start, 0, e.n):
        return []
    return e.derive(g.start, 0, e.n)


def derivation_sum(g: Grammar, x: Sequence[str], reverse: bool = False):
    """The sum of ``enumerate_derivations`` computed without listing trees."""
    e = _SumEnumerator(g, x, reverse)
    if not e.ok(g.start, 0, e.n):
        return g.semiring.zero
    return e.derive(g.start, 0, e.n)


def count_derivations(g: Grammar, x: Sequence[str]) -> int:
    e = _SumEnumerator(g, x, counting=True)
    if not e.ok(g.start, 0, e.n):
        return 0
    return e.derive(g.start, 0, e.n)


def oracle_total(g: Grammar, x: Sequence[str], max_trees: int = MAX_ENUMERATED_TREES):
    """Z_x by explicit enumeration, or by the memoized sum when there are too many trees."""
    sr = g.semiring
    if count_derivations(g, x) > max_trees:
        return derivation_sum(g, x)
    return sr.sum(w for _, w in enumerate_derivations(g, x))


# ---------------------------------------------------------------------------
# all short strings at once (real weights)


class StringIndex:
    """All strings over ``alphabet`` up to ``max_len``, with a concatenation table."""

    def __init__(self, alphabet, max_len):
        self.alphabet = list(alphabet)
        self.max_len = max_len
        self.strings = [()]
        for n in range(1, max_len + 1):
            self.strings.extend(itertools.product(self.alphabet, repeat=n))
        self.index = {s: i for i, s in enumerate(self.strings)}
        us, vs, ws = [], [], []
        for u in self.strings:
            for v in self.strings:
                if len(u) + len(v) <= max_len:
                    us.append(self.index[u])
                    vs.append(self.index[v])
                    ws.append(self.index[u + v])
        self.u = np.array(us, dtype=np.int64)
        self.v = np.array(vs, dtype=np.int64)
        self.w = np.array(ws, dtype=np.int64)

    def __len__(self):
        return len(self.strings)

    def concat(self, a, b):
        return np.bincount(self.w, weights=a[self.u] * b[self.v], minlength=len(self.strings))

    def unit(self, s):
        vec = np.zeros(len(self.strings))
        if s in self.index:
            vec[self.index[s]] = 1.0
        return vec


def inside_all_strings(g: Grammar, max_len: int, alphabet=None, tol=INSIDE_TOL,
                       max_iters=INSIDE_MAX_ITERS) -> dict:
    """``{string: Z_string}`` for every terminal string of length <= ``max_len``.

    Real weights only.  The inside system is iterated from zero, which sums
    derivations by increasing height; iteration stops once the largest
    change is below ``tol``.  Raises InfiniteDerivations if that never happens.
    """
    if alphabet is None:
        alphabet = sorted(g.terminal_set)
    idx = StringIndex(alphabet, max_len)
    nts = g.nonterminals
    pos = {a: i for i, a in enumerate(nts)}
    size = len(idx)
    term_vec = {a: idx.unit((a,)) for a in alphabet}
    empty = idx.unit(())
    inside = np.zeros((len(nts), size))
    prods = [(pos[p.lhs], float(p.weight), p.rhs) for p in g.productions]
    for _ in range(max_iters):
        new = np.zeros_like(inside)
        for lhs, w, rhs in prods:
            vec = empty
            for s in rhs:
                part = inside[pos[s]] if s in pos else term_vec.get(s)
                if part is None:
                    vec = None
                    break
                vec = idx.concat(vec, part)
            if vec is not None:
                new[lhs] += w * vec
        delta = float(np.max(np.abs(new - inside))) if inside.size else 0.0
        inside = new
        if delta < tol:
            break
    else:
        raise InfiniteDerivations("inside iteration did not settle; derivation weights do not converge")
    if g.start not in pos:
        return {s: 0.0 for s in idx.strings}
    row = inside[pos[g.start]]
    return {s: float(row[i]) for i, s in enumerate(idx.strings)}


class PrefixBound(NamedTuple):
    lower: float  # sum of Z over completions up to the horizon
    tail_known: bool
    tail: float  # exact remaining mass, when tail_known


def geometric_family(g: Grammar):
    """``(terminal, p)`` if ``g`` is ``S -> a S | a`` or ``S -> S a | a`` with weights ``p, 1-p``."""
    if len(g.productions) != 2 or len(g.terminals) != 1:
        return None
    s, a = g.start, g.terminals[0]
    rec = g.weight_of(s, (a, s)) if g.lookup(s, (a, s)) is not None else g.weight_of(s, (s, a))
    stop = g.weight_of(s, (a,))
    if g.lookup(s, (a,)) is None or (g.lookup(s, (a, s)) is None and g.lookup(s, (s, a)) is None):
        return None
    if abs(float(rec) + float(stop) - 1.0) > 1e-12:
        return None
    return a, float(rec)


def truncated_prefix_weight(g: Grammar, y: Sequence[str], horizon: int) -> PrefixBound:
    """Sum of ``Z_{yz}`` over completions with ``|yz| <= horizon`` (real weights).

    The sum itself always comes from :func:`inside_all_strings`.  For the
    one-terminal geometric families the exact mass of longer strings,
    ``p ** horizon``, is attached as the tail.
    """
    y = tuple(y)
    if len(y) > horizon or any(t not in g.terminal_set for t in y):
        return PrefixBound(0.0, geometric_family(g) is not None, 0.0)
    table = inside_all_strings(g, horizon)
    lower = sum(w for s, w in table.items() if s[: len(y)] == y)
    fam = geometric_family(g)
    if fam is None:
        return PrefixBound(lower, False, 0.0)
    _, p = fam
    return PrefixBound(lower, True, p ** horizon)
