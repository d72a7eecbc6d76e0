import pytest

from earleykit.grammar import parse_grammar
from earleykit.semiring import REAL

G1_TEXT = """start: S
1.0 S -> NP VP
0.5 NP -> det n
0.5 NP -> n
1.0 VP -> v NP
"""

G4_TEXT = "start: S\n0.5 S -> S a\n0.5 S -> a\n"
G5_TEXT = "start: S\n0.5 S -> a S\n0.5 S -> a\n"
AMBIGUOUS_TEXT = "start: S\n0.2 S -> S S\n0.8 S -> a\n"
NULL_TEXT = "start: A\n0.25 A -> A A\n0.5 A ->\n0.25 A -> a\n"
UNARY_CYCLE_TEXT = "start: S\n1.0 S -> A\n0.5 A -> B\n0.5 B -> A\n0.5 B -> b\n"


def grammar(text, sr=REAL):
    return parse_grammar(text, sr)


@pytest.fixture
def g1():
    return grammar(G1_TEXT)


@pytest.fixture
def g4():
    return grammar(G4_TEXT)


@pytest.fixture
def g5():
    return grammar(G5_TEXT)
