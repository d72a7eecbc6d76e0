"""Grammar preprocessing.

The engines need a grammar with no nullary productions (except a fresh
start symbol rewriting to the empty string) and no cycles of unary
productions.  This module computes the weight tables that make those
rewrites weight-preserving and the extra tables used for prefix weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Callable, NamedTuple, Optional

import networkx as nx

from .errors import NonConvergent, NotPreprocessed
from .grammar import FRESH_MARK, Grammar, Production, fresh_symbol, restrict_to_generating
from .semiring import ABS_TOL, Semiring

MAX_ITERS = 100_000
DIVERGENCE_BOUND = 1e12


# ---------------------------------------------------------------------------
# fixed points


def solve_fixed_point(
    semiring: Semiring,
    variables: list,
    rules: list,
    max_iters: int = MAX_ITERS,
    tol: float = ABS_TOL,
    on_iterate: Optional[Callable] = None,
) -> dict:
    """Minimal solution of ``x_A = (+)_rules w (x) prod x_B`` by Jacobi iteration from zero.

    ``rules`` is a list of ``(lhs, weight, [rhs variables])``.
    """
    sr = semiring
    index = {v: i for i, v in enumerate(variables)}
    compiled = [(index[lhs], w, [index[b] for b in rhs]) for lhs, w, rhs in rules]
    x = [sr.zero] * len(variables)
    for _ in range(max_iters):
        new = [sr.zero] * len(variables)
        for lhs, w, rhs in compiled:
            acc = w
            for b in rhs:
                acc = sr.times(acc, x[b])
                if sr.is_zero(acc):
                    break
            new[lhs] = sr.plus(new[lhs], acc)
        for v in new:
            if sr.diverged(v):
                raise NonConvergent(f"fixed point exceeded the divergence bound {DIVERGENCE_BOUND:g}")
        delta = max((sr.distance(a, b) for a, b in zip(x, new)), default=0.0)
        x = new
        if on_iterate is not None:
            on_iterate(dict(zip(variables, x)))
        if delta < tol:
            return dict(zip(variables, x))
    raise NonConvergent(f"fixed point did not converge within {max_iters} iterations")


def nullable_set(g: Grammar) -> set:
    nts = g.nonterminal_set
    nullable: set = set()
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs not in nullable and all(s in nts and s in nullable for s in p.rhs):
                nullable.add(p.lhs)
                changed = True
    return nullable


def null_weights(g: Grammar, max_iters: int = MAX_ITERS, on_iterate=None) -> dict:
    """e_A: total weight of derivations of the empty string from each nonterminal."""
    sr = g.semiring
    nullable = nullable_set(g)
    result = {a: sr.zero for a in g.nonterminals}
    if not nullable:
        return result
    variables = [a for a in g.nonterminals if a in nullable]
    rules = [
        (p.lhs, p.weight, list(p.rhs))
        for p in g.productions
        if p.lhs in nullable and all(s in nullable for s in p.rhs)
    ]
    result.update(solve_fixed_point(sr, variables, rules, max_iters=max_iters, on_iterate=on_iterate))
    return result


def free_weights(g: Grammar, max_iters: int = MAX_ITERS, on_iterate=None) -> dict:
    """Z_A: total weight of all derivation subtrees rooted at each nonterminal."""
    nts = g.nonterminal_set
    rules = [(p.lhs, p.weight, [s for s in p.rhs if s in nts]) for p in g.productions]
    return solve_fixed_point(g.semiring, list(g.nonterminals), rules, max_iters=max_iters, on_iterate=on_iterate)


# ---------------------------------------------------------------------------
# nullary elimination


def eliminate_nullary(g: Grammar, null: Optional[dict] = None) -> Grammar:
    """Remove nullary productions while preserving every nonempty string's weight.

    Each production is expanded into the variants where every nullable
    nonterminal is either kept or dropped (its null weight folded into the
    production weight).  If the start symbol is nullable, a fresh start
    symbol ``S@`` is added with ``S@ -> S`` and ``S@ -> (empty)``.
    """
    sr = g.semiring
    if null is None:
        null = null_weights(g)
    nts = g.nonterminal_set
    if all(sr.is_zero(null.get(a, sr.zero)) for a in nts):
        return g

    out = []
    for p in g.productions:
        options = []
        for s in p.rhs:
            e = null.get(s, sr.zero) if s in nts else sr.zero
            if sr.is_zero(e):
                options.append(((s, sr.one),))
            else:
                options.append(((s, sr.one), (None, e)))
        for choice in cartesian(*options):
            rhs = tuple(s for s, _ in choice if s is not None)
            if not rhs:
                continue
            w = p.weight
            for _, f in choice:
                w = sr.times(w, f)
            out.append(Production(p.lhs, rhs, w))

    start = g.start
    e_start = null.get(start, sr.zero)
    if not sr.is_zero(e_start):
        new_start = fresh_symbol(start + FRESH_MARK, g.symbols())
        out.append(Production(new_start, (start,), sr.one))
        out.append(Production(new_start, (), e_start))
        filtered = restrict_to_generating(out, new_start, sr, set(nts) | {new_start})
        if not filtered.productions:
            return Grammar([Production(new_start, (), e_start)], new_start, sr)
        return filtered
    return restrict_to_generating(out, start, sr, nts)


# ---------------------------------------------------------------------------
# closures over strongly connected components


def kleene_closure(nodes: list, edges: dict, semiring: Semiring) -> dict:
    """All-pairs path sums (including the empty path) within one node set.

    ``edges`` maps ``(a, b)`` to a weight.  Runs the Kleene / Floyd /
    Warshall elimination in O(K^3) semiring operations.
    """
    sr = semiring
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    m = [[sr.zero] * n for _ in range(n)]
    for (a, b), w in edges.items():
        if a in idx and b in idx:
            m[idx[a]][idx[b]] = sr.plus(m[idx[a]][idx[b]], w)
    for k in range(n):
        s = sr.star(m[k][k])
        col = [m[i][k] for i in range(n)]
        row = [m[k][j] for j in range(n)]
        new = [r[:] for r in m]
        for i in range(n):
            if sr.is_zero(col[i]):
                continue
            left = sr.times(col[i], s)
            for j in range(n):
                if sr.is_zero(row[j]):
                    continue
                new[i][j] = sr.plus(m[i][j], sr.times(left, row[j]))
        m = new
    out = {}
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            w = m[i][j]
            if i == j:
                w = sr.plus(sr.one, w)
            if not sr.is_zero(w):
                out[(a, b)] = w
    return out


def _components(nodes, edge_keys):
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)
    graph.add_edges_from(edge_keys)
    comps = list(nx.strongly_connected_components(graph))
    cond = nx.condensation(graph, scc=comps)
    order = list(nx.topological_sort(cond))  # sources first
    return graph, [comps[c] for c in order]


class UnaryClosure(NamedTuple):
    scc_id: dict  # nonterminal -> component index
    components: list  # list of lists of nonterminals
    cyclic: set  # nonterminals on some unary cycle (incl. self-loops)
    chain: dict  # (A, B) -> w(A =>* B), same component only


def unary_edges(g: Grammar) -> dict:
    sr = g.semiring
    edges: dict = {}
    for p in g.productions:
        if len(p.rhs) == 1 and p.rhs[0] in g.nonterminal_set:
            key = (p.lhs, p.rhs[0])
            edges[key] = sr.plus(edges.get(key, sr.zero), p.weight)
    return edges


def unary_closure(g: Grammar) -> UnaryClosure:
    if any(p.arity == 0 for p in g.productions):
        raise NotPreprocessed("unary closure requires a grammar without nullary productions")
    return closure_of_unary_edges(list(g.nonterminals), unary_edges(g), g.semiring)


def closure_of_unary_edges(nodes, edges, semiring) -> UnaryClosure:
    _, comps = _components(nodes, edges.keys())
    scc_id, components, cyclic, chain = {}, [], set(), {}
    for c, comp in enumerate(comps):
        members = sorted(comp)
        components.append(members)
        for a in members:
            scc_id[a] = c
        if len(members) > 1 or (members[0], members[0]) in edges:
            cyclic.update(members)
        chain.update(kleene_closure(members, edges, semiring))
    return UnaryClosure(scc_id, components, cyclic, chain)


def eliminate_unary_cycles(g: Grammar, closure: Optional[UnaryClosure] = None) -> Grammar:
    """Collapse unary cycles into precomputed chain weights.

    For a nonterminal ``A`` on a unary cycle, ``A`` keeps its name for the
    "top" copy (which only rewrites to the bottom copies of its component)
    and ``A@u`` names the "bottom" copy that carries the original
    non-cyclic productions.  Nonterminals off any cycle are left alone.
    """
    if closure is None:
        closure = unary_closure(g)
    if not closure.cyclic:
        return g
    taken = g.symbols()
    low = {}
    for a in sorted(closure.cyclic):
        name = fresh_symbol(a + FRESH_MARK + "u", taken)
        taken.add(name)
        low[a] = name
    out = []
    for p in g.productions:
        if (
            len(p.rhs) == 1
            and p.lhs in closure.cyclic
            and p.rhs[0] in closure.cyclic
            and closure.scc_id[p.lhs] == closure.scc_id[p.rhs[0]]
        ):
            continue
        out.append(Production(low.get(p.lhs, p.lhs), p.rhs, p.weight))
    for (a, b), w in closure.chain.items():
        if a in closure.cyclic:
            out.append(Production(a, (low[b],), w))
    return Grammar(out, g.start, g.semiring)


def unary_heights(g: Grammar) -> dict:
    """Longest unary-chain depth below each nonterminal; raises on a unary cycle."""
    edges: dict = {}
    for p in g.productions:
        if len(p.rhs) == 1 and p.rhs[0] in g.nonterminal_set:
            edges.setdefault(p.lhs, set()).add(p.rhs[0])
    graph = nx.DiGraph()
    graph.add_nodes_from(g.nonterminals)
    for a, bs in edges.items():
        for b in bs:
            graph.add_edge(a, b)
    try:
        order = list(nx.topological_sort(graph))
    except nx.NetworkXUnfeasible:
        raise NotPreprocessed("grammar has a unary cycle") from None
    height = {}
    for a in reversed(order):
        height[a] = 1 + max((height[b] for b in edges.get(a, ())), default=-1)
    return height


# ---------------------------------------------------------------------------
# left corners and suffix products


class LeftCorner(NamedTuple):
    scc_id: dict
    within: dict  # (C, B) -> w(C =>*lc B), same component only
    full: dict  # C -> {B: w(C =>*lc B)} over all reachable B


def left_corner_closure(g: Grammar, free: dict) -> LeftCorner:
    sr = g.semiring
    nts = g.nonterminal_set
    edges: dict = {}
    for p in g.productions:
        if p.rhs and p.rhs[0] in nts:
            w = p.weight
            for s in p.rhs[1:]:
                if s in nts:
                    w = sr.times(w, free[s])
            key = (p.lhs, p.rhs[0])
            edges[key] = sr.plus(edges.get(key, sr.zero), w)
    _, comps = _components(list(g.nonterminals), edges.keys())
    scc_id, within = {}, {}
    out_edges: dict = {}
    for (a, b), w in edges.items():
        out_edges.setdefault(a, []).append((b, w))
    for c, comp in enumerate(comps):
        for a in comp:
            scc_id[a] = c
    full: dict = {}
    # sinks of the condensation first so every successor is already closed
    for comp in reversed(comps):
        members = sorted(comp)
        local = kleene_closure(members, edges, sr)
        within.update(local)
        exits = [(c2, d, w) for c2 in members for d, w in out_edges.get(c2, ()) if d not in comp]
        for c in members:
            row = {}
            for b in members:
                w = local.get((c, b))
                if w is not None:
                    row[b] = w
            for c2, d, w in exits:
                lead = local.get((c, c2))
                if lead is None:
                    continue
                lead = sr.times(lead, w)
                for b, v in full[d].items():
                    row[b] = sr.plus(row.get(b, sr.zero), sr.times(lead, v))
            full[c] = {b: v for b, v in row.items() if not sr.is_zero(v)}
    return LeftCorner(scc_id, within, full)


def suffix_products(g: Grammar, free: dict) -> list:
    """``table[pid][dot]`` = product of free weights of nonterminals in ``rhs[dot:]``."""
    sr = g.semiring
    nts = g.nonterminal_set
    table = []
    for p in g.productions:
        row = [sr.one] * (len(p.rhs) + 1)
        for d in range(len(p.rhs) - 1, -1, -1):
            s = p.rhs[d]
            row[d] = sr.times(free[s], row[d + 1]) if s in nts else row[d + 1]
        table.append(row)
    return table


def first_terminals(g: Grammar) -> dict:
    """Terminals that can begin a string derived from each nonterminal.

    Assumes no nullable nonterminals (true after preprocessing), so only
    the leftmost child matters.
    """
    nts = g.nonterminal_set
    first = {a: set() for a in g.nonterminals}
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if not p.rhs:
                continue
            s = p.rhs[0]
            add = first[s] if s in nts else {s}
            if not add <= first[p.lhs]:
                first[p.lhs] |= add
                changed = True
    return {a: frozenset(v) for a, v in first.items()}


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class ClosureTables:
    null_weight: dict = field(default_factory=dict)
    free_weight: dict = field(default_factory=dict)
    unary_chain: dict = field(default_factory=dict)
    left_corner: dict = field(default_factory=dict)
    left_corner_full: dict = field(default_factory=dict)
    suffix_product: list = field(default_factory=list)

    def to_text(self, g: Grammar) -> str:
        fmt = g.semiring.format
        lines = []
        for a in sorted(self.null_weight):
            lines.append(f"null\t{a}\t{fmt(self.null_weight[a])}")
        for a in sorted(self.free_weight):
            lines.append(f"free\t{a}\t{fmt(self.free_weight[a])}")
        for a, b in sorted(self.unary_chain):
            lines.append(f"unary\t{a}\t{b}\t{fmt(self.unary_chain[(a, b)])}")
        for a, b in sorted(self.left_corner):
            lines.append(f"left_corner\t{a}\t{b}\t{fmt(self.left_corner[(a, b)])}")
        rows = []
        for pid, p in enumerate(g.productions):
            for dot, w in enumerate(self.suffix_product[pid] if self.suffix_product else ()):
                rows.append((str(p), dot, fmt(w)))
        for prod, dot, w in sorted(rows):
            lines.append(f"suffix\t{prod}\t{dot}\t{w}")
        return "\n".join(lines) + "\n"


class Preprocessed(NamedTuple):
    grammar: Grammar
    tables: Optional[ClosureTables]


def preprocess_pipeline(g: Grammar, tables: bool = True) -> Preprocessed:
    """filter -> null weights -> nullary elimination -> unary closure ->
    unary-cycle elimination -> (free weights -> left corners -> suffix products)."""
    from .grammar import filter_generating

    g0 = filter_generating(g)
    null = null_weights(g0)
    g1 = eliminate_nullary(g0, null)
    closure = closure_of_unary_edges(
        list(g1.nonterminals), unary_edges(_drop_nullary(g1)), g1.semiring
    )
    g2 = eliminate_unary_cycles(g1, closure)
    if not tables:
        return Preprocessed(g2, None)
    free = free_weights(g2)
    lc = left_corner_closure(g2, free)
    t = ClosureTables(
        null_weight=null,
        free_weight=free,
        unary_chain=closure.chain,
        left_corner=lc.within,
        left_corner_full=lc.full,
        suffix_product=suffix_products(g2, free),
    )
    return Preprocessed(g2, t)


def closure_tables(g: Grammar) -> ClosureTables:
    """Prefix-weight tables for an already preprocessed grammar."""
    free = free_weights(g)
    lc = left_corner_closure(g, free)
    return ClosureTables(
        free_weight=free,
        left_corner=lc.within,
        left_corner_full=lc.full,
        suffix_product=suffix_products(g, free),
    )


def _drop_nullary(g: Grammar) -> Grammar:
    # The only nullary rule left after elimination belongs to a fresh start
    # symbol that never occurs on a right-hand side, so it cannot take part
    # in a unary cycle.
    return Grammar([p for p in g.productions if p.rhs], g.start, g.semiring)


def check_preprocessed(g: Grammar) -> None:
    """Raise NotPreprocessed unless ``g`` is safe for the chart engines."""
    on_rhs = {s for p in g.productions for s in p.rhs}
    for p in g.productions:
        if not p.rhs and (p.lhs != g.start or g.start in on_rhs):
            raise NotPreprocessed(f"nullary production {p} must be eliminated first")
    unary_heights(g)
