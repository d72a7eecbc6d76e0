import random

import pytest

from earleykit.errors import InfiniteDerivations
from earleykit.grammar import Grammar
from earleykit.oracle import (
    MAX_ENUMERATED_TREES, count_derivations, derivable_chart, derivation_sum, enumerate_derivations, inside_all_strings,
    oracle_total, rewrites_check, tree_weight, truncated_prefix_weight,
)
from earleykit.semiring import REAL
from earleykit.synthetic import random_preprocessed_grammar, sentence_suite

from conftest import AMBIGUOUS_TEXT, NULL_TEXT, UNARY_CYCLE_TEXT, grammar

SENT = "det n v n".split()


def test_g1_single_tree(g1):
    trees = enumerate_derivations(g1, SENT)
    assert len(trees) == 1
    tree, w = trees[0]
    assert w == pytest.approx(0.25)
    assert tree.to_bracketed() == "(S (NP det n) (VP v (NP n)))"
    assert tree.yield_() == tuple(SENT)
    assert tree_weight(g1, tree) == w


def test_ambiguous_two_trees():
    g = grammar(AMBIGUOUS_TEXT)
    trees = enumerate_derivations(g, ["a"] * 3)
    assert len(trees) == 2
    assert sum(w for _, w in trees) == pytest.approx(0.04096)
    assert count_derivations(g, ["a"] * 3) == 2
    # Catalan numbers
    assert [count_derivations(g, ["a"] * n) for n in range(1, 7)] == [1, 1, 2, 5, 14, 42]


def test_unknown_symbol(g1):
    assert enumerate_derivations(g1, ["q"]) == []
    assert oracle_total(g1, ["q"]) == 0.0


def test_children_match_productions(g1):
    g = grammar(AMBIGUOUS_TEXT)
    for tree, _ in enumerate_derivations(g, ["a"] * 4):
        stack = [tree]
        while stack:
            t = stack.pop()
            rhs = g.productions[t.pid].rhs
            assert tuple(c if isinstance(c, str) else c.label for c in t.children) == rhs
            stack.extend(c for c in t.children if not isinstance(c, str))


def test_rewrites_check(g1):
    assert rewrites_check(g1, ["NP"], ["det", "n"])
    assert not rewrites_check(g1, ["VP"], ["det"])
    assert rewrites_check(g1, [], [])
    assert not rewrites_check(g1, [], ["n"])
    assert rewrites_check(g1, ["NP", "v", "NP"], ["n", "v", "det", "n"])


def test_derivable_chart(g1):
    chart = derivable_chart(g1, SENT)
    assert ("S", 0, 4) in chart
    assert ("NP", 0, 2) in chart
    assert ("VP", 0, 2) not in chart


def test_infinite_derivations():
    g = grammar(UNARY_CYCLE_TEXT)
    with pytest.raises(InfiniteDerivations):
        enumerate_derivations(g, ["b"])
    with pytest.raises(InfiniteDerivations):
        derivation_sum(grammar(NULL_TEXT), ["a"])


def test_two_traversal_orders_agree():
    for seed in range(30):
        g = random_preprocessed_grammar(seed)
        for x in sentence_suite(g, seed, 6, 6):
            if count_derivations(g, x) > MAX_ENUMERATED_TREES:
                assert REAL.close(derivation_sum(g, x), derivation_sum(g, x, reverse=True))
                continue
            fwd = enumerate_derivations(g, x)
            rev = enumerate_derivations(g, x, reverse=True)
            assert len(fwd) == len(rev)
            assert {t.to_bracketed() for t, _ in fwd} == {t.to_bracketed() for t, _ in rev}
            a = sum(w for _, w in fwd)
            b = sum(w for _, w in rev)
            assert REAL.close(a, b)
            assert REAL.close(derivation_sum(g, x), a)


def test_permutation_invariance():
    rng = random.Random(0)
    for seed in range(20):
        g = random_preprocessed_grammar(seed)
        prods = list(g.productions)
        rng.shuffle(prods)
        h = Grammar(prods, g.start, g.semiring)
        for x in sentence_suite(g, seed, 5, 6):
            assert REAL.close(oracle_total(h, x), oracle_total(g, x))


def test_dp_fallback_matches_enumeration():
    g = grammar(AMBIGUOUS_TEXT)
    x = ["a"] * 7
    assert oracle_total(g, x, max_trees=10) == pytest.approx(oracle_total(g, x), rel=1e-12)


def test_inside_all_strings_matches_enumeration():
    for seed in range(10):
        g = random_preprocessed_grammar(seed, max_nonterminals=4, max_productions=8)
        table = inside_all_strings(g, 4)
        for s, w in table.items():
            assert w == pytest.approx(oracle_total(g, s), rel=1e-9, abs=1e-12)


def test_inside_all_strings_cyclic():
    # S -> A, A <-> B at 0.5 each, B -> b: Z("b") = 1 / (1 - 0.25) * 0.5 * 0.5
    table = inside_all_strings(grammar(UNARY_CYCLE_TEXT), 2)
    assert table[("b",)] == pytest.approx(1 / 3, abs=1e-12)


def test_truncated_prefix_g5(g5):
    bound = truncated_prefix_weight(g5, ["a"], 12)
    assert bound.lower == pytest.approx(1 - 0.5 ** 12, abs=1e-12)
    assert bound.tail_known
    assert bound.lower + bound.tail == pytest.approx(1.0, abs=1e-12)


def test_truncated_prefix_g4(g4):
    bound = truncated_prefix_weight(g4, ["a", "a"], 12)
    assert bound.lower == pytest.approx(0.5 - 0.5 ** 12, abs=1e-12)
    assert bound.lower + bound.tail == pytest.approx(0.5, abs=1e-12)


def test_truncated_prefix_unparseable(g5):
    assert truncated_prefix_weight(g5, ["b"], 6).lower == 0.0
    g = grammar("1 S -> a b\n")
    assert truncated_prefix_weight(g, ["b"], 4).lower == 0.0
    assert not truncated_prefix_weight(g, ["a"], 4).tail_known
