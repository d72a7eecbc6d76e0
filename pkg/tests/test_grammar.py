import pytest
from hypothesis import given, settings, strategies as st

from earleykit.errors import BadWeight, GrammarSyntaxError, NoStart
from earleykit.grammar import Grammar, Production, filter_generating, grammar_size, parse_grammar
from earleykit.semiring import BOOLEAN, REAL
from earleykit.synthetic import random_preprocessed_grammar, sentence_suite
from earleykit.earley import recognize_naive


def test_single_production():
    g = parse_grammar("start: S\n1.0 S -> a", REAL)
    assert len(g) == 1 and g.size == 2


def test_duplicates_merge():
    g = parse_grammar("0.25 S -> a\n0.25 S -> a\n", REAL)
    assert len(g) == 1 and g.productions[0].weight == 0.5


def test_nullary_production():
    g = parse_grammar("0.5 S ->", REAL)
    assert g.productions[0].rhs == () and g.productions[0].arity == 0


def test_start_defaults_to_first_lhs():
    g = parse_grammar("# c\n1 A -> B\n1 B -> b\n", REAL)
    assert g.start == "A"
    assert g.nonterminals == ["A", "B"] and g.terminals == ["b"]


def test_errors():
    with pytest.raises(NoStart):
        parse_grammar("# nothing\n", REAL)
    with pytest.raises(GrammarSyntaxError) as e:
        parse_grammar("start: S\n1 S a\n", REAL)
    assert e.value.lineno == 2
    with pytest.raises(BadWeight):
        parse_grammar("x S -> a\n", REAL)
    with pytest.raises(BadWeight):
        parse_grammar("0 S -> a\n", REAL)
    with pytest.raises(GrammarSyntaxError):
        parse_grammar("1 S -> ^a\n", REAL)


def test_boolean_weights():
    g = parse_grammar("1 S -> a\n", BOOLEAN)
    assert g.productions[0].weight is True


def test_sizes():
    r = grammar_size(parse_grammar("1 S -> a\n", REAL))
    assert (r.size, r.productions, r.max_arity) == (2, 1, 1)
    r = grammar_size(parse_grammar("1 S -> NP VP\n1 NP -> n\n", REAL))
    assert (r.size, r.productions, r.max_arity) == (5, 2, 2)


def test_filter_generating_examples():
    g = parse_grammar("1 S -> a\n", REAL)
    assert filter_generating(g).same_as(g)
    g = parse_grammar("1 S -> A b\n1 A -> A\n", REAL)
    assert len(filter_generating(g)) == 0
    g = parse_grammar("1 S -> A\n1 A -> a\n1 B -> B c\n", REAL)
    f = filter_generating(g)
    assert sorted(str(p) for p in f.productions) == ["A -> a", "S -> A"]


def test_filter_generating_idempotent_and_weight_preserving():
    for seed in range(30):
        g = random_preprocessed_grammar(seed)
        # add a useless nonterminal that never generates
        g = Grammar(g.productions + [Production("Dead", ("Dead", "a"), 0.5),
                                     Production(g.start, ("Dead",), 0.1)], g.start, REAL)
        f = filter_generating(g)
        assert filter_generating(f).same_as(f)
        assert "Dead" not in f.nonterminal_set
        for x in sentence_suite(g, seed, count=6, max_len=5):
            assert REAL.close(recognize_naive(g, x).total, recognize_naive(f, x).total)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_serialization_round_trip(seed):
    g = random_preprocessed_grammar(seed)
    back = parse_grammar(g.to_text(), REAL)
    assert back.same_as(g)
    assert back.to_text() == g.to_text()
