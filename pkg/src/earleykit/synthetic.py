"""Seeded grammar and sentence generators for tests and benchmarks."""

from __future__ import annotations

import math
import random
from typing import Optional

from .grammar import Grammar, Production
from .semiring import Semiring, REAL

TERMINALS = ("a", "b", "c")


def _rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def convert_weights(g: Grammar, sr: Semiring) -> Grammar:
    """Re-weight a real-weighted grammar: boolean -> true, tropical/log -> -log w, else unchanged."""
    if sr.name == "boolean":
        conv = lambda w: True  # noqa: E731
    elif sr.name in ("tropical", "log"):
        conv = lambda w: -math.log(w) if sr.name == "tropical" else math.log(w)  # noqa: E731
    else:
        conv = lambda w: sr.parse(repr(float(w)))  # noqa: E731
    return Grammar([Production(p.lhs, p.rhs, conv(float(p.weight))) for p in g.productions], g.start, sr)


def random_preprocessed_grammar(seed, max_nonterminals=10, max_productions=20, max_arity=3,
                                terminals=TERMINALS, mass=0.9) -> Grammar:
    """A random real-weighted grammar with no nullary rules and no unary cycles.

    Nonterminals are ``X0 .. Xn``; unary rules only point to a higher index,
    every nonterminal has a terminal rule, and each left-hand side's weights
    sum to at most ``mass``.
    """
    rng = _rng(seed)
    n_nt = rng.randint(2, max_nonterminals)
    nts = [f"X{i}" for i in range(n_nt)]
    rules = [(a, (rng.choice(terminals),)) for a in nts]
    budget = max(max_productions - n_nt, 0)
    for _ in range(rng.randint(1, max(budget, 1))):
        i = rng.randrange(n_nt)
        arity = rng.randint(1, max_arity)
        if arity == 1:
            if i == n_nt - 1:
                rhs = (rng.choice(terminals),)
            else:
                rhs = (rng.choice(nts[i + 1:]),)
        else:
            rhs = tuple(rng.choice(nts + list(terminals)) for _ in range(arity))
        rules.append((nts[i], rhs))
    return _normalize(rules, nts[0], rng, mass)


def _normalize(rules, start, rng, mass, exact=False) -> Grammar:
    by_lhs: dict = {}
    for lhs, rhs in rules:
        by_lhs.setdefault(lhs, {})[rhs] = rng.uniform(0.1, 1.0)
    prods = []
    for lhs, table in by_lhs.items():
        total = sum(table.values())
        scale = mass if exact else mass * rng.uniform(0.6, 1.0)
        for rhs, w in table.items():
            prods.append(Production(lhs, rhs, w / total * scale))
    return Grammar(prods, start, REAL)


def random_cyclic_grammar(seed, max_nonterminals=5, max_productions=12, terminals=("a", "b"),
                          mass=0.85) -> Grammar:
    """A random grammar with epsilon rules and a unary cycle.

    Each left-hand side sums to at most ``mass`` < 1, so every fixed point
    involved converges and every unary cycle has weight below 0.9.
    """
    rng = _rng(seed)
    n_nt = rng.randint(2, max_nonterminals)
    nts = [f"X{i}" for i in range(n_nt)]
    rules = [(a, (rng.choice(terminals),)) for a in nts]
    # a guaranteed unary cycle and a guaranteed nullable symbol
    a, b = rng.sample(nts, 2)
    rules += [(a, (b,)), (b, (a,)), (rng.choice(nts), ())]
    for _ in range(rng.randint(0, max(max_productions - len(rules), 0))):
        lhs = rng.choice(nts)
        arity = rng.randint(0, 3)
        rules.append((lhs, tuple(rng.choice(nts + list(terminals)) for _ in range(arity))))
    return _normalize(rules, nts[0], rng, mass)


def random_tight_pcfg(seed, max_nonterminals=6, terminals=("a", "b")) -> Grammar:
    """A proper, subcritical PCFG: each lhs sums to one and expects < 1 nonterminal child."""
    rng = _rng(seed)
    n_nt = rng.randint(1, max_nonterminals)
    nts = [f"X{i}" for i in range(n_nt)]
    prods = []
    for a in nts:
        stop = rng.uniform(0.55, 0.8)
        lex = rng.sample(terminals, rng.randint(1, len(terminals)))
        shares = [rng.uniform(0.1, 1.0) for _ in lex]
        for t, s in zip(lex, shares):
            prods.append(Production(a, (t,), stop * s / sum(shares)))
        rest = []
        for _ in range(rng.randint(1, 3)):
            arity = rng.randint(1, 2)
            rhs = tuple(rng.choice(nts + list(terminals)) for _ in range(arity))
            if rhs == (a,):
                rhs = (a, rng.choice(terminals))
            rest.append(rhs)
        shares = [rng.uniform(0.1, 1.0) for _ in rest]
        for rhs, s in zip(rest, shares):
            prods.append(Production(a, rhs, (1 - stop) * s / sum(shares)))
    return Grammar(prods, nts[0], REAL)


def sample_sentence(g: Grammar, rng, max_depth=8, max_len=8) -> Optional[tuple]:
    """Top-down sample; past ``max_depth`` only the shortest rules are used."""
    rng = _rng(rng)
    nts = g.nonterminal_set
    shortest = {}
    for a in g.nonterminals:
        pids = g.by_lhs[a]
        lens = [sum(1 for s in g.productions[p].rhs if s in nts) for p in pids]
        best = min(lens)
        shortest[a] = [p for p, n in zip(pids, lens) if n == best]
    out = []

    class _GiveUp(Exception):
        pass

    def expand(a, depth):
        if len(out) > max_len or depth > max_depth + 50:
            # too long, or stuck in a symbol that never terminates
            raise _GiveUp
        pids = shortest[a] if depth >= max_depth else g.by_lhs[a]
        weights = [float(g.productions[p].weight) for p in pids]
        pid = rng.choices(pids, weights=weights)[0]
        for s in g.productions[pid].rhs:
            if s in nts:
                expand(s, depth + 1)
            else:
                out.append(s)

    try:
        expand(g.start, 0)
    except _GiveUp:
        return None
    return tuple(out)


def sentence_suite(g: Grammar, seed, count=20, max_len=8) -> list:
    """Half sampled from the grammar, half uniformly random strings."""
    rng = _rng(seed)
    terms = sorted(g.terminal_set) or ["a"]
    sents = []
    tries = 0
    while len(sents) < count // 2 and tries < 50 * count:
        tries += 1
        s = sample_sentence(g, rng, max_len=max_len)
        if s:
            sents.append(s)
    while len(sents) < count:
        n = rng.randint(1, max_len)
        sents.append(tuple(rng.choice(terms) for _ in range(n)))
    return sents


# ---------------------------------------------------------------------------
# fixed families


def geometric_right(p=0.5) -> Grammar:
    """S -> a S (p) | a (1 - p)."""
    return Grammar([Production("S", ("a", "S"), p), Production("S", ("a",), 1 - p)], "S", REAL)


def geometric_left(p=0.5) -> Grammar:
    """S -> S a (p) | a (1 - p)."""
    return Grammar([Production("S", ("S", "a"), p), Production("S", ("a",), 1 - p)], "S", REAL)


def ambiguous_binary(p=0.2) -> Grammar:
    """S -> S S (p) | a (1 - p): Catalan-many trees."""
    return Grammar([Production("S", ("S", "S"), p), Production("S", ("a",), 1 - p)], "S", REAL)


def noun_phrase_family(tags=4, max_adj=3, sr: Semiring = REAL) -> Grammar:
    """Noun phrases sharing the ``det adj*`` prefix across agreement classes.

    ``NP_t -> det adj^m n_t`` for every class ``t`` and ``m <= max_adj``,
    plus ``S -> NP_t v NP_u``.
    """
    prods = []
    for t in range(tags):
        for m in range(max_adj + 1):
            prods.append(Production(f"NP{t}", ("det",) + ("adj",) * m + (f"n{t}",), 1.0 / (max_adj + 1)))
        for u in range(tags):
            prods.append(Production("S", (f"NP{t}", "v", f"NP{u}"), 1.0 / tags ** 2))
    g = Grammar(prods, "S", REAL)
    return g if sr is REAL else convert_weights(g, sr)


def noun_phrase_sentences(tags=4, max_adj=3, count=10, seed=0) -> list:
    rng = _rng(seed)
    out = []
    for _ in range(count):
        s = []
        for part in range(2):
            s += ["det"] + ["adj"] * rng.randint(0, max_adj) + [f"n{rng.randrange(tags)}"]
            if part == 0:
                s.append("v")
        out.append(tuple(s))
    return out


def lexicon_grammar(words=1000, sr: Semiring = REAL) -> Grammar:
    """S -> N with ``words`` preterminal rules N -> w_i."""
    prods = [Production("S", ("N",), 1.0)]
    prods += [Production("N", (f"w{i}",), 1.0 / words) for i in range(words)]
    g = Grammar(prods, "S", REAL)
    return g if sr is REAL else convert_weights(g, sr)


def bench_grammar(seed=0, tags=20, words_per_tag=150, phrases=50, rules_per_phrase=40) -> Grammar:
    """A large treebank-like grammar: lexical rules for ``tags`` parts of speech and phrase rules.

    Phrase nonterminals ``P0 .. Pn`` (``P0`` is the start) rewrite to one to
    three symbols; every phrase has a rule of two tags, so all generate, and
    recursion through ``P0`` allows long sentences.
    """
    rng = _rng(seed)
    tag_names = [f"T{i}" for i in range(tags)]
    phrase_names = [f"P{i}" for i in range(phrases)]
    rules = []
    for t in tag_names:
        for w in range(words_per_tag):
            rules.append((t, (f"{t.lower()}_{w}",)))
    for i, p in enumerate(phrase_names):
        rules.append((p, (rng.choice(tag_names), rng.choice(tag_names))))
        for _ in range(rules_per_phrase - 1):
            arity = rng.choice((2, 2, 3, 3, 1))
            rhs = []
            for pos in range(arity):
                if rng.random() < 0.55:
                    rhs.append(rng.choice(tag_names))
                else:
                    rhs.append(rng.choice(phrase_names[i + 1:] or tag_names))
            if arity == 1 and rhs[0] in phrase_names:
                rhs.append(rng.choice(tag_names))
            rules.append((p, tuple(rhs)))
        if i > 0:
            rules.append((phrase_names[0], (p, phrase_names[0])))
    return _normalize(rules, phrase_names[0], rng, 0.95, exact=True)


def bench_sentences(g: Grammar, lengths, per_length=3, seed=0, max_tries=200_000) -> dict:
    """``{length: [sentence, ...]}`` sampled from ``g`` by rejection."""
    rng = _rng(seed)
    want = {n: [] for n in lengths}
    top = max(lengths)
    for _ in range(max_tries):
        s = sample_sentence(g, rng, max_depth=30, max_len=top)
        if s and len(s) in want and len(want[len(s)]) < per_length:
            want[len(s)].append(s)
        if all(len(v) >= per_length for v in want.values()):
            break
    return want


def complexity_sentence(n) -> tuple:
    return ("a",) * n
