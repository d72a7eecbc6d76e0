"""Exception hierarchy shared by every module.

The CLI prints ``<ClassName>: <message>`` and maps :class:`DataError`
subclasses to exit status 2.
"""


class EarleyError(Exception):
    """Base class for all errors raised by earleykit."""


class DataError(EarleyError):
    """Bad input data (grammar file, weights, automaton)."""


class GrammarSyntaxError(DataError):
    def __init__(self, lineno, reason):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


class NoStart(DataError):
    pass


class BadWeight(DataError):
    pass


class NonConvergent(DataError):
    """Fixed-point iteration hit the iteration cap or the divergence bound."""


class Divergent(DataError):
    """A geometric series has no finite sum (star is undefined)."""


class NotPreprocessed(DataError):
    """An engine was handed a grammar that still has nullary rules or unary cycles."""


class InfiniteDerivations(DataError):
    """The set of derivation trees for a sentence is infinite."""


class NeedsTables(EarleyError):
    pass


class NonCommutative(EarleyError):
    pass


class NoParse(EarleyError):
    pass


class WeightedInput(EarleyError):
    pass


class TimeBudgetExceeded(EarleyError):
    pass
