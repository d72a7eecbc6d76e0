"""Single-automaton grammars.

A WFSA grammar accepts strings ``rho ^A``; accepting ``rho ^A`` with weight
``w`` plays the role of a production ``A -> rho`` with weight ``w``.  Labels
are plain strings: ``<eps>`` for the empty label, ``^A`` for the end marker
of nonterminal ``A``; any other label is a nonterminal iff its hatted form
occurs somewhere in the automaton, otherwise a terminal.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import networkx as nx

from .errors import GrammarSyntaxError, NotPreprocessed, WeightedInput
from .grammar import EPSILON_LABEL, FRESH_MARK, Grammar, fresh_symbol
from .semiring import Semiring
from .transform import closure_of_unary_edges, kleene_closure, solve_fixed_point

EPS = EPSILON_LABEL
HAT = "^"


def hat(a: str) -> str:
    return HAT + a


def is_hat(label: str) -> bool:
    return label.startswith(HAT)


def unhat(label: str) -> str:
    return label[len(HAT):]


class Arc(NamedTuple):
    src: int
    label: str
    dst: int
    weight: object


class Wfsa:
    """States are the integers ``0 .. num_states - 1``."""

    def __init__(self, semiring: Semiring, num_states=0, arcs=(), initial=None, final=None, start=None):
        self.semiring = semiring
        self.num_states = num_states
        self.arcs = [Arc(*a) for a in arcs]
        self.initial = dict(initial or {})
        self.final = dict(final or {})
        self.start = start

    def add_state(self) -> int:
        self.num_states += 1
        return self.num_states - 1

    def add_arc(self, src, label, dst, weight):
        self.arcs.append(Arc(src, label, dst, weight))

    @property
    def states(self):
        return range(self.num_states)

    @property
    def size(self) -> int:
        return len(self.arcs)

    def nonterminals(self) -> set:
        return {unhat(a.label) for a in self.arcs if is_hat(a.label)}

    def labels(self) -> set:
        return {a.label for a in self.arcs}

    def terminals(self) -> set:
        nts = self.nonterminals()
        return {a.label for a in self.arcs if a.label != EPS and not is_hat(a.label) and a.label not in nts}

    def out_arcs(self) -> list:
        out = [[] for _ in range(self.num_states)]
        for a in self.arcs:
            out[a.src].append(a)
        return out

    def copy(self) -> "Wfsa":
        return Wfsa(self.semiring, self.num_states, self.arcs, self.initial, self.final, self.start)

    def __repr__(self):
        return f"<Wfsa states={self.num_states} arcs={len(self.arcs)} start={self.start}>"

    # -- text format -------------------------------------------------------

    def to_text(self) -> str:
        fmt = self.semiring.format
        lines = []
        if self.start is not None:
            lines.append(f"start {self.start}")
        for q in sorted(self.initial):
            lines.append(f"initial {q} {fmt(self.initial[q])}")
        for q in sorted(self.final):
            lines.append(f"final {q} {fmt(self.final[q])}")
        for a in self.arcs:
            lines.append(f"{a.src} {a.dst} {a.label} {fmt(a.weight)}")
        return "\n".join(lines) + "\n"


def parse_wfsa(text: str, semiring: Semiring) -> Wfsa:
    m = Wfsa(semiring)
    hi = -1

    def state(tok, lineno):
        try:
            q = int(tok)
        except ValueError:
            raise GrammarSyntaxError(lineno, f"state {tok!r} is not an integer") from None
        if q < 0:
            raise GrammarSyntaxError(lineno, f"negative state {q}")
        return q

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        head = toks[0]
        if head == "start":
            if len(toks) != 2:
                raise GrammarSyntaxError(lineno, "expected 'start <symbol>'")
            m.start = toks[1]
        elif head in ("initial", "final"):
            if len(toks) != 3:
                raise GrammarSyntaxError(lineno, f"expected '{head} <state> <weight>'")
            q = state(toks[1], lineno)
            w = semiring.parse(toks[2])
            hi = max(hi, q)
            table = m.initial if head == "initial" else m.final
            table[q] = semiring.plus(table[q], w) if q in table else w
        else:
            if len(toks) != 4:
                raise GrammarSyntaxError(lineno, "expected '<src> <dst> <label> <weight>'")
            src, dst = state(toks[0], lineno), state(toks[1], lineno)
            hi = max(hi, src, dst)
            m.add_arc(src, toks[2], dst, semiring.parse(toks[3]))
    m.num_states = hi + 1
    if m.start is None:
        hats = [unhat(a.label) for a in m.arcs if is_hat(a.label)]
        if hats:
            m.start = hats[0]
    return m


def load_wfsa(path, semiring: Semiring) -> Wfsa:
    with open(path, encoding="utf-8") as f:
        return parse_wfsa(f.read(), semiring)


# ---------------------------------------------------------------------------
# construction


def encode_cfg_as_wfsa(g: Grammar) -> Wfsa:
    """One path ``rho ^A`` per production, all leaving the single initial state 0.

    The production weight sits on the first arc, every other arc has weight one.
    """
    sr = g.semiring
    m = Wfsa(sr, 1, initial={0: sr.one}, start=g.start)
    for p in g.productions:
        labels = list(p.rhs) + [hat(p.lhs)]
        q = 0
        for idx, lab in enumerate(labels):
            r = m.add_state()
            m.add_arc(q, lab, r, p.weight if idx == 0 else sr.one)
            q = r
        m.final[q] = sr.one
    return m


def trim(m: Wfsa) -> Wfsa:
    """Drop states that are not both reachable and co-reachable; renumber canonically."""
    sr = m.semiring
    out = m.out_arcs()
    fwd = set(q for q, w in m.initial.items() if not sr.is_zero(w))
    stack = list(fwd)
    while stack:
        q = stack.pop()
        for a in out[q]:
            if not sr.is_zero(a.weight) and a.dst not in fwd:
                fwd.add(a.dst)
                stack.append(a.dst)
    back_adj = [[] for _ in range(m.num_states)]
    for a in m.arcs:
        if not sr.is_zero(a.weight):
            back_adj[a.dst].append(a.src)
    bwd = set(q for q, w in m.final.items() if not sr.is_zero(w))
    stack = list(bwd)
    while stack:
        q = stack.pop()
        for p in back_adj[q]:
            if p not in bwd:
                bwd.add(p)
                stack.append(p)
    keep = fwd & bwd
    return _renumber(m, keep)


def _renumber(m: Wfsa, keep) -> Wfsa:
    """Canonical numbering: breadth-first from the initial states, arcs in order."""
    sr = m.semiring
    out = m.out_arcs()
    order = {}
    queue = deque(q for q in sorted(m.initial) if q in keep)
    for q in queue:
        order.setdefault(q, len(order))
    queue = deque(order)
    while queue:
        q = queue.popleft()
        for a in out[q]:
            if a.dst in keep and a.dst not in order:
                order[a.dst] = len(order)
                queue.append(a.dst)
    res = Wfsa(sr, len(order), start=m.start)
    for q in sorted(order, key=order.get):
        for a in out[q]:
            if a.dst in order and not sr.is_zero(a.weight):
                res.add_arc(order[q], a.label, order[a.dst], a.weight)
    res.initial = {order[q]: w for q, w in m.initial.items() if q in order and not sr.is_zero(w)}
    res.final = {order[q]: w for q, w in m.final.items() if q in order and not sr.is_zero(w)}
    return res


def merge_parallel_arcs(m: Wfsa) -> Wfsa:
    sr = m.semiring
    merged: dict = {}
    for a in m.arcs:
        key = (a.src, a.label, a.dst)
        merged[key] = sr.plus(merged[key], a.weight) if key in merged else a.weight
    res = Wfsa(sr, m.num_states, initial=m.initial, final=m.final, start=m.start)
    for (s, lab, d), w in merged.items():
        if not sr.is_zero(w):
            res.add_arc(s, lab, d, w)
    return res


# ---------------------------------------------------------------------------
# epsilon handling


def epsilon_graph(m: Wfsa):
    g = nx.DiGraph()
    g.add_nodes_from(m.states)
    g.add_edges_from((a.src, a.dst) for a in m.arcs if a.label == EPS)
    return g


def has_epsilon_cycle(m: Wfsa) -> bool:
    return not nx.is_directed_acyclic_graph(epsilon_graph(m))


def eliminate_epsilon_cycles(m: Wfsa) -> Wfsa:
    """Make the epsilon-arc graph acyclic without changing any string weight.

    Inside each strongly connected component of epsilon arcs the all-pairs
    closure ``W(p, q)`` is computed; every arc leaving ``q`` (other than an
    epsilon arc that stays in the component) is copied to each ``p`` of the
    component with weight ``W(p, q) (x) w``, and final weights are folded the
    same way.  Epsilon arcs within the component are then dropped.
    """
    sr = m.semiring
    graph = epsilon_graph(m)
    comps = [c for c in nx.strongly_connected_components(graph)
             if len(c) > 1 or graph.has_edge(next(iter(c)), next(iter(c)))]
    if not comps:
        return m
    res = m.copy()
    out = m.out_arcs()
    for comp in comps:
        members = sorted(comp)
        eps_edges = {}
        for q in members:
            for a in out[q]:
                if a.label == EPS and a.dst in comp:
                    key = (q, a.dst)
                    eps_edges[key] = sr.plus(eps_edges[key], a.weight) if key in eps_edges else a.weight
        closure = kleene_closure(members, eps_edges, sr)
        new_arcs = []
        for p in members:
            fin = sr.zero
            for q in members:
                wpq = closure.get((p, q))
                if wpq is None:
                    continue
                if q in m.final:
                    fin = sr.plus(fin, sr.times(wpq, m.final[q]))
                for a in out[q]:
                    if a.label == EPS and a.dst in comp:
                        continue
                    new_arcs.append(Arc(p, a.label, a.dst, sr.times(wpq, a.weight)))
            if sr.is_zero(fin):
                res.final.pop(p, None)
            else:
                res.final[p] = fin
        res.arcs = [a for a in res.arcs if a.src not in comp] + new_arcs
    return merge_parallel_arcs(res)


def _topo_eps(m: Wfsa):
    try:
        return list(nx.topological_sort(epsilon_graph(m)))
    except nx.NetworkXUnfeasible:
        raise NotPreprocessed("automaton has an epsilon cycle") from None


def final_closure(m: Wfsa) -> dict:
    """Total weight of epsilon paths (length >= 0) from each state to a final state."""
    sr = m.semiring
    out = m.out_arcs()
    fc = {}
    for q in reversed(_topo_eps(m)):
        w = m.final.get(q, sr.zero)
        for a in out[q]:
            if a.label == EPS and a.dst in fc:
                w = sr.plus(w, sr.times(a.weight, fc[a.dst]))
        if not sr.is_zero(w):
            fc[q] = w
    return fc


def epsilon_forward(m: Wfsa, seed: dict) -> dict:
    """Push weights along epsilon arcs: result[q] = sum_p seed[p] (x) W_eps(p, q)."""
    sr = m.semiring
    out = m.out_arcs()
    val = dict(seed)
    for q in _topo_eps(m):
        w = val.get(q)
        if w is None or sr.is_zero(w):
            continue
        for a in out[q]:
            if a.label == EPS:
                inc = sr.times(w, a.weight)
                val[a.dst] = sr.plus(val[a.dst], inc) if a.dst in val else inc
    return {q: w for q, w in val.items() if not sr.is_zero(w)}


# ---------------------------------------------------------------------------
# nullary and unary elimination


def wfsa_null_weights(m: Wfsa, max_iters=None) -> dict:
    """e_A for every nonterminal, as the minimal solution of the path system.

    Variables are the forward weights ``v_q`` of paths from an initial
    state to ``q`` reading only epsilon and nonterminals (each nonterminal
    ``B`` contributing ``e_B``) and the null weights themselves.
    """
    sr = m.semiring
    nts = m.nonterminals()
    fc_rules = []  # backward epsilon closure to a final state, as variables f_q
    rules = []
    for q, w in m.initial.items():
        rules.append((("v", q), w, []))
    for q, w in m.final.items():
        fc_rules.append((("f", q), w, []))
    for a in m.arcs:
        if a.label == EPS:
            rules.append((("v", a.dst), a.weight, [("v", a.src)]))
            fc_rules.append((("f", a.src), a.weight, [("f", a.dst)]))
        elif a.label in nts:
            rules.append((("v", a.dst), a.weight, [("v", a.src), ("e", a.label)]))
        elif is_hat(a.label):
            rules.append((("e", unhat(a.label)), a.weight, [("v", a.src), ("f", a.dst)]))
    all_rules = rules + fc_rules
    variables = sorted({r[0] for r in all_rules} | {v for r in all_rules for v in r[2]} | {("e", a) for a in nts},
                       key=repr)
    kw = {} if max_iters is None else {"max_iters": max_iters}
    sol = solve_fixed_point(sr, variables, all_rules, **kw)
    return {a: sol.get(("e", a), sr.zero) for a in nts}


def _label_filter_product(m: Wfsa, step, initial_tag) -> Wfsa:
    """Intersect with a deterministic label automaton.

    ``step(tag, label)`` returns the next tag or None to block the arc.
    Epsilon arcs keep the tag.
    """
    sr = m.semiring
    out = m.out_arcs()
    ids: dict = {}
    res = Wfsa(sr, 0, start=m.start)
    queue = deque()

    def sid(q, tag):
        key = (q, tag)
        if key not in ids:
            ids[key] = res.add_state()
            queue.append(key)
        return ids[key]

    for q, w in m.initial.items():
        res.initial[sid(q, initial_tag)] = w
    while queue:
        q, tag = queue.popleft()
        s = ids[(q, tag)]
        if q in m.final:
            res.final[s] = m.final[q]
        for a in out[q]:
            nxt = tag if a.label == EPS else step(tag, a.label)
            if nxt is None:
                continue
            res.add_arc(s, a.label, sid(a.dst, nxt), a.weight)
    return res


def wfsa_filter_generating(m: Wfsa, nonterminals=None) -> Wfsa:
    """Remove arcs that mention nonterminals which cannot derive any string."""
    nts = set(m.nonterminals() if nonterminals is None else nonterminals)
    out = m.out_arcs()
    fc_states = set()
    back = [[] for _ in range(m.num_states)]
    for a in m.arcs:
        if a.label == EPS:
            back[a.dst].append(a.src)
    stack = [q for q in m.final]
    fc_states.update(stack)
    while stack:
        q = stack.pop()
        for p in back[q]:
            if p not in fc_states:
                fc_states.add(p)
                stack.append(p)
    gen: set = set()
    while True:
        seen = set(q for q in m.initial)
        stack = list(seen)
        new = set()
        while stack:
            q = stack.pop()
            for a in out[q]:
                if is_hat(a.label):
                    if a.dst in fc_states:
                        new.add(unhat(a.label))
                    continue
                if a.label in nts and a.label not in gen:
                    continue
                if a.dst not in seen:
                    seen.add(a.dst)
                    stack.append(a.dst)
        if new <= gen:
            break
        gen |= new
    res = m.copy()
    res.arcs = [
        a for a in m.arcs
        if not (a.label in nts and a.label not in gen)
        and not (is_hat(a.label) and unhat(a.label) not in gen)
    ]
    return trim(res)


def wfsa_eliminate_nullary(m: Wfsa, null: Optional[dict] = None) -> Wfsa:
    """Remove accepted strings of the form ``^A`` while preserving all weights.

    Every arc reading a nullable ``B`` gets a parallel epsilon arc weighted
    by ``w (x) e_B``; the result is then intersected with the complement of
    ``{^A}`` (a two-state "read anything yet" filter).  If the start symbol
    is nullable, a fresh start ``S@`` is added accepting ``^S@`` with weight
    ``e_S`` and ``S ^S@`` with weight one.
    """
    sr = m.semiring
    if null is None:
        null = wfsa_null_weights(m)
    nts = m.nonterminals()
    if all(sr.is_zero(null.get(a, sr.zero)) for a in nts):
        return m
    aug = m.copy()
    for a in m.arcs:
        if a.label in nts:
            e = null.get(a.label, sr.zero)
            if not sr.is_zero(e):
                aug.add_arc(a.src, EPS, a.dst, sr.times(a.weight, e))

    def step(seen, label):
        if is_hat(label):
            return seen if seen else None
        return True

    res = _label_filter_product(aug, step, False)
    e_start = null.get(m.start, sr.zero) if m.start is not None else sr.zero
    if m.start is not None and not sr.is_zero(e_start):
        taken = nts | m.terminals()
        new_start = fresh_symbol(m.start + FRESH_MARK, taken)
        g0, mid, f = res.add_state(), res.add_state(), res.add_state()
        res.initial[g0] = sr.one
        res.add_arc(g0, hat(new_start), f, e_start)
        res.add_arc(g0, m.start, mid, sr.one)
        res.add_arc(mid, hat(new_start), f, sr.one)
        res.final[f] = sr.one
        res.start = new_start
        nts = nts | {new_start}
    return wfsa_filter_generating(res, nts)


def wfsa_unary_rules(m: Wfsa) -> dict:
    """Weights of accepted two-symbol strings ``B ^A`` as a map ``(A, B) -> w``."""
    sr = m.semiring
    nts = m.nonterminals()
    x0 = epsilon_forward(m, dict(m.initial))
    fc = final_closure(m)
    by_label: dict = {}
    for a in m.arcs:
        if a.label in nts and a.src in x0:
            seed = by_label.setdefault(a.label, {})
            inc = sr.times(x0[a.src], a.weight)
            seed[a.dst] = sr.plus(seed[a.dst], inc) if a.dst in seed else inc
    rules: dict = {}
    hats_from: dict = {}
    for a in m.arcs:
        if is_hat(a.label) and a.dst in fc:
            hats_from.setdefault(a.src, []).append((unhat(a.label), sr.times(a.weight, fc[a.dst])))
    for b, seed in by_label.items():
        reach = epsilon_forward(m, seed)
        for q, w in reach.items():
            for lhs, hw in hats_from.get(q, ()):
                key = (lhs, b)
                inc = sr.times(w, hw)
                rules[key] = sr.plus(rules[key], inc) if key in rules else inc
    return {k: v for k, v in rules.items() if not sr.is_zero(v)}


def wfsa_eliminate_unary(m: Wfsa, closure=None) -> Wfsa:
    """Collapse unary cycles.

    For a nonterminal ``A`` on a unary cycle, the end marker of its original
    paths becomes ``^A@u`` (the bottom copy); accepted strings ``B ^A@u``
    with ``A``, ``B`` in one component are removed by a small filter
    automaton, and a new component accepts ``B@u ^A`` with the chain weight
    ``w(A =>* B)``.
    """
    sr = m.semiring
    nts = m.nonterminals()
    if closure is None:
        closure = closure_of_unary_edges(sorted(nts), wfsa_unary_rules(m), sr)
    cyclic = closure.cyclic
    if not cyclic:
        return m
    taken = set(nts) | m.terminals()
    low = {}
    for a in sorted(cyclic):
        name = fresh_symbol(a + FRESH_MARK + "u", taken)
        taken.add(name)
        low[a] = name
    relabeled = m.copy()
    relabeled.arcs = [
        Arc(a.src, hat(low[unhat(a.label)]), a.dst, a.weight)
        if is_hat(a.label) and unhat(a.label) in cyclic else a
        for a in m.arcs
    ]
    low_scc = {low[a]: closure.scc_id[a] for a in cyclic}

    def step(tag, label):
        if is_hat(label):
            if isinstance(tag, int) and low_scc.get(unhat(label)) == tag:
                return None
            return "other"
        if tag == "start" and label in cyclic:
            return closure.scc_id[label]
        return "other"

    res = _label_filter_product(relabeled, step, "start")
    g0, f = res.add_state(), res.add_state()
    res.initial[g0] = sr.one
    res.final[f] = sr.one
    mids = {}
    for (a, b), w in sorted(closure.chain.items()):
        if a not in cyclic or sr.is_zero(w):
            continue
        if b not in mids:
            mids[b] = res.add_state()
            res.add_arc(g0, low[b], mids[b], sr.one)
        res.add_arc(mids[b], hat(a), f, w)
    return trim(res)


def preprocess_wfsa(m: Wfsa) -> Wfsa:
    """Nullary elimination, epsilon-cycle elimination, unary-cycle elimination."""
    m1 = wfsa_eliminate_nullary(m)
    m2 = eliminate_epsilon_cycles(m1)
    m3 = wfsa_eliminate_unary(m2)
    return trim(eliminate_epsilon_cycles(m3))


# ---------------------------------------------------------------------------
# boolean determinization and minimization


def _is_unweighted(m: Wfsa) -> bool:
    sr = m.semiring
    ws = [a.weight for a in m.arcs] + list(m.initial.values()) + list(m.final.values())
    return all(sr.close(w, sr.one) for w in ws)


def determinize_boolean(m: Wfsa, forget_weights: bool = False) -> Wfsa:
    """Subset construction on the label language (weights must be trivial)."""
    sr = m.semiring
    if not forget_weights and not _is_unweighted(m):
        raise WeightedInput("automaton has non-trivial weights; pass forget_weights to project them away")
    out = m.out_arcs()

    def close(states):
        seen = set(states)
        stack = list(states)
        while stack:
            q = stack.pop()
            for a in out[q]:
                if a.label == EPS and a.dst not in seen:
                    seen.add(a.dst)
                    stack.append(a.dst)
        return frozenset(seen)

    start = close(q for q, w in m.initial.items() if not sr.is_zero(w))
    ids = {start: 0}
    queue = deque([start])
    res = Wfsa(sr, 1, initial={0: sr.one}, start=m.start)
    while queue:
        s = queue.popleft()
        sid = ids[s]
        if any(q in m.final for q in s):
            res.final[sid] = sr.one
        moves: dict = {}
        for q in s:
            for a in out[q]:
                if a.label != EPS:
                    moves.setdefault(a.label, set()).add(a.dst)
        for label in sorted(moves):
            t = close(moves[label])
            if t not in ids:
                ids[t] = res.add_state()
                queue.append(t)
            res.add_arc(sid, label, ids[t], sr.one)
    return trim(res)


def minimize_boolean(m: Wfsa) -> Wfsa:
    """Partition refinement on a trimmed deterministic automaton."""
    sr = m.semiring
    out = m.out_arcs()
    block = {q: (1 if q in m.final else 0) for q in m.states}
    while True:
        sigs = {}
        for q in m.states:
            sig = (block[q], tuple(sorted((a.label, block[a.dst]) for a in out[q])))
            sigs[q] = sig
        ids: dict = {}
        new_block = {q: ids.setdefault(sigs[q], len(ids)) for q in m.states}
        if len(ids) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    res = Wfsa(sr, len(set(block.values())), start=m.start)
    seen = set()
    for a in m.arcs:
        key = (block[a.src], a.label, block[a.dst])
        if key not in seen:
            seen.add(key)
            res.add_arc(*key, sr.one)
    res.initial = {block[q]: sr.one for q in m.initial}
    res.final = {block[q]: sr.one for q in m.final}
    return trim(res)


def determinize_minimize_boolean(m: Wfsa, forget_weights: bool = False, minimize: bool = True) -> Wfsa:
    d = determinize_boolean(m, forget_weights=forget_weights)
    return minimize_boolean(d) if minimize else d


def is_deterministic(m: Wfsa) -> bool:
    if len(m.initial) > 1:
        return False
    seen = set()
    for a in m.arcs:
        if a.label == EPS:
            return False
        if (a.src, a.label) in seen:
            return False
        seen.add((a.src, a.label))
    return True


# ---------------------------------------------------------------------------
# side tables


@dataclass
class SideTables:
    can_advance: dict = field(default_factory=dict)  # q -> set of A with q -A-> *
    can_end_in: dict = field(default_factory=dict)  # q -> frozenset of A with q -*^A-> *
    final_closure: dict = field(default_factory=dict)  # q -> weight
    hat_final: dict = field(default_factory=dict)  # q -> [(B, w)]: q -^B-> F, folded
    init_closure: dict = field(default_factory=dict)  # q -> weight of epsilon paths from I
    out_term: dict = field(default_factory=dict)  # (q, a) -> [(q', w)]
    out_nt: dict = field(default_factory=dict)  # q -> [(B, q', w)]
    out_eps: dict = field(default_factory=dict)  # q -> [(q', w)]
    rank: dict = field(default_factory=dict)  # topological rank of states / ('nt', B)
    nonterminals: frozenset = frozenset()
    terminal_out_degree: int = 0  # c: max arcs with one terminal label out of one state
    nonterminal_arcs: int = 0  # |E_N|


def build_side_tables(m: Wfsa) -> SideTables:
    sr = m.semiring
    nts = frozenset(m.nonterminals())
    t = SideTables(nonterminals=nts)
    back = [[] for _ in range(m.num_states)]
    term_deg: dict = {}
    for a in m.arcs:
        back[a.dst].append(a.src)
        if a.label == EPS:
            t.out_eps.setdefault(a.src, []).append((a.dst, a.weight))
        elif is_hat(a.label):
            pass
        elif a.label in nts:
            t.can_advance.setdefault(a.src, set()).add(a.label)
            t.out_nt.setdefault(a.src, []).append((a.label, a.dst, a.weight))
            t.nonterminal_arcs += 1
        else:
            t.out_term.setdefault((a.src, a.label), []).append((a.dst, a.weight))
            term_deg[(a.src, a.label)] = term_deg.get((a.src, a.label), 0) + 1
    t.terminal_out_degree = max(term_deg.values(), default=0)

    ends: dict = {}
    for a in m.arcs:
        if is_hat(a.label):
            ends.setdefault(unhat(a.label), set()).add(a.src)
    can_end: dict = {}
    for lhs, sources in ends.items():
        seen = set(sources)
        stack = list(sources)
        while stack:
            q = stack.pop()
            for p in back[q]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        for q in seen:
            can_end.setdefault(q, set()).add(lhs)
    t.can_end_in = {q: frozenset(v) for q, v in can_end.items()}

    t.final_closure = final_closure(m)
    hf: dict = {}
    for a in m.arcs:
        if is_hat(a.label) and a.dst in t.final_closure:
            key = (a.src, unhat(a.label))
            w = sr.times(a.weight, t.final_closure[a.dst])
            hf[key] = sr.plus(hf[key], w) if key in hf else w
    for (q, b), w in hf.items():
        if not sr.is_zero(w):
            t.hat_final.setdefault(q, []).append((b, w))
    t.init_closure = epsilon_forward(m, dict(m.initial))

    # Dependencies inside one span: epsilon moves, completing a nonterminal
    # from a state, and advancing over a completed nonterminal from a state
    # that starts a span.
    graph = nx.DiGraph()
    graph.add_nodes_from(m.states)
    graph.add_nodes_from(("nt", b) for b in nts)
    for q, lst in t.out_eps.items():
        for r, _ in lst:
            graph.add_edge(q, r)
    for q, lst in t.hat_final.items():
        for b, _ in lst:
            graph.add_edge(q, ("nt", b))
    for q in t.init_closure:
        for b, r, _ in t.out_nt.get(q, ()):
            graph.add_edge(("nt", b), r)
    try:
        order = list(nx.topological_sort(graph))
    except nx.NetworkXUnfeasible:
        raise NotPreprocessed("automaton has an epsilon cycle or a unary cycle") from None
    t.rank = {v: i for i, v in enumerate(order)}
    return t


# ---------------------------------------------------------------------------
# enumeration (tests and oracle support)


def enumerate_strings(m: Wfsa, max_len: int) -> dict:
    """Total weight of every accepted label string with at most ``max_len`` non-epsilon labels."""
    sr = m.semiring
    if has_epsilon_cycle(m):
        raise NotPreprocessed("enumeration needs an epsilon-acyclic automaton")
    out = m.out_arcs()
    rank = {q: i for i, q in enumerate(_topo_eps(m))}
    totals: dict = {}
    layer: dict = {}
    for q, w in m.initial.items():
        layer[(q, ())] = sr.plus(layer[(q, ())], w) if (q, ()) in layer else w
    while layer:
        closed = _eps_propagate(m, layer, rank, out)
        nxt: dict = {}
        for (q, s), w in closed.items():
            if q in m.final:
                val = sr.times(w, m.final[q])
                totals[s] = sr.plus(totals[s], val) if s in totals else val
            if len(s) >= max_len:
                continue
            for a in out[q]:
                if a.label == EPS:
                    continue
                key = (a.dst, s + (a.label,))
                val = sr.times(w, a.weight)
                nxt[key] = sr.plus(nxt[key], val) if key in nxt else val
        layer = nxt
    return {s: w for s, w in totals.items() if not sr.is_zero(w)}


def _eps_propagate(m, layer, rank, out):
    """Close one layer under epsilon moves, visiting states in topological order."""
    sr = m.semiring
    vals = dict(layer)
    heap = [(rank[q], q, s) for (q, s) in vals]
    heapq.heapify(heap)
    seen = set()
    while heap:
        _, q, s = heapq.heappop(heap)
        if (q, s) in seen:
            continue
        seen.add((q, s))
        w = vals[(q, s)]
        for a in out[q]:
            if a.label != EPS:
                continue
            key = (a.dst, s)
            inc = sr.times(w, a.weight)
            vals[key] = sr.plus(vals[key], inc) if key in vals else inc
            heapq.heappush(heap, (rank[a.dst], a.dst, s))
    return vals


def wfsa_productions(m: Wfsa, max_len: int) -> dict:
    """Accepted strings read as productions: ``(lhs, rhs) -> weight`` for |rhs| < max_len."""
    prods = {}
    for s, w in enumerate_strings(m, max_len).items():
        if s and is_hat(s[-1]) and not any(is_hat(lab) for lab in s[:-1]):
            prods[(unhat(s[-1]), s[:-1])] = w
    return prods
